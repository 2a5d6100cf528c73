//! Weighted (q,t)-norms over grouped vectors, their duals, the GLASSO
//! penalty, and the latent overlapping-group norm Ω.
//!
//! Infinite exponents are represented by `f64::INFINITY` and evaluated with
//! exact max branches.

use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::{Duplication, GroupStructure};
use crate::solvers::prox::block_shrink;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGroupNorm {
    /// Inner exponent applied within each group.
    pub q: f64,
    /// Outer exponent applied across group norms.
    pub t: f64,
    /// Positive weight per group.
    pub weights: Vec<f64>,
    /// Weight `M` on a trailing response coordinate, when present.
    pub response_weight: Option<f64>,
}

impl WeightedGroupNorm {
    pub fn new(q: f64, t: f64, weights: Vec<f64>, response_weight: Option<f64>) -> Result<Self> {
        let n = WeightedGroupNorm {
            q,
            t,
            weights,
            response_weight,
        };
        n.check()?;
        Ok(n)
    }

    /// The (2,∞)-norm with weights 1/√p_l, optionally with a response weight M.
    pub fn two_inf(structure: &GroupStructure, response_weight: Option<f64>) -> Self {
        WeightedGroupNorm {
            q: 2.0,
            t: f64::INFINITY,
            weights: structure.sqrt_sizes().iter().map(|s| 1.0 / s).collect(),
            response_weight,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.q >= 1.0) || !(self.t >= 1.0) {
            return Err(GwglError::input(format!(
                "norm exponents must lie in [1, inf], got q={} t={}",
                self.q, self.t
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(GwglError::input("group weights must be positive and finite"));
        }
        if let Some(m) = self.response_weight {
            if !(m > 0.0) || !m.is_finite() {
                return Err(GwglError::input(format!("response weight must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// The dual norm: conjugate exponents and inverted weights.
    pub fn dual(&self) -> Self {
        WeightedGroupNorm {
            q: conjugate_exponent(self.q),
            t: conjugate_exponent(self.t),
            weights: self.weights.iter().map(|w| 1.0 / w).collect(),
            response_weight: self.response_weight.map(|m| 1.0 / m),
        }
    }

    /// Evaluates the norm; see [`group_norm_qt`].
    pub fn eval(&self, z: &[f64], structure: &GroupStructure) -> Result<f64> {
        group_norm_qt(z, structure, self)
    }
}

/// `r` with `1/q + 1/r = 1`.
pub fn conjugate_exponent(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

pub fn lp_norm<'a>(values: impl IntoIterator<Item = &'a f64>, q: f64) -> f64 {
    let it = values.into_iter();
    if q.is_infinite() {
        it.fold(0.0f64, |m, v| m.max(v.abs()))
    } else if q == 1.0 {
        it.map(|v| v.abs()).sum()
    } else if q == 2.0 {
        it.map(|v| v * v).sum::<f64>().sqrt()
    } else {
        it.map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn combine(blocks: &[f64], t: f64) -> f64 {
    lp_norm(blocks, t)
}

/// Weighted block values `w_l‖z^l‖_q` plus the response block `M|y|`.
fn weighted_blocks(z: &[f64], structure: &GroupStructure, norm: &WeightedGroupNorm) -> Result<Vec<f64>> {
    norm.check()?;
    if norm.weights.len() != structure.num_groups() {
        return Err(GwglError::dim(format!(
            "{} weights for {} groups",
            norm.weights.len(),
            structure.num_groups()
        )));
    }
    let expected = structure.p + usize::from(norm.response_weight.is_some());
    if z.len() != expected {
        return Err(GwglError::dim(format!(
            "vector has length {} but the norm expects {expected}",
            z.len()
        )));
    }
    let mut blocks: Vec<f64> = structure
        .groups
        .iter()
        .zip(&norm.weights)
        .map(|(g, w)| w * lp_norm(g.iter().map(|&i| &z[i]), norm.q))
        .collect();
    if let Some(m) = norm.response_weight {
        blocks.push(m * z[structure.p].abs());
    }
    Ok(blocks)
}

/// `(Σ_l (w_l‖z^l‖_q)^t)^{1/t}`, with `t = ∞` meaning the max over groups.
/// When the norm carries a response weight `M`, the last entry of `z` is the
/// response and contributes the extra block `M|y|`.
pub fn group_norm_qt(z: &[f64], structure: &GroupStructure, norm: &WeightedGroupNorm) -> Result<f64> {
    let blocks = weighted_blocks(z, structure, norm)?;
    Ok(combine(&blocks, norm.t))
}

/// Dual of the weighted (q,t)-norm, i.e. the (q*,t*)-norm with weights `1/w_l`
/// (and `1/M` on the response). For the (2,∞) norm with weights `1/√p_l` this is
/// `Σ_l √p_l‖v^l‖_2 + |v_resp|/M`.
pub fn dual_norm_group(v: &[f64], structure: &GroupStructure, norm: &WeightedGroupNorm) -> Result<f64> {
    norm.check()?;
    group_norm_qt(v, structure, &norm.dual())
}

/// `Σ_l √p_l ‖β^l‖_2` on a partition.
pub fn glasso_penalty(beta: &[f64], structure: &GroupStructure) -> Result<f64> {
    structure.require_partition()?;
    if beta.len() != structure.p {
        return Err(GwglError::dim(format!(
            "coefficient vector has length {} but structure has p={}",
            beta.len(),
            structure.p
        )));
    }
    Ok(weighted_group_l2(beta, structure, &structure.sqrt_sizes()))
}

/// `Σ_l d_l ‖β^l‖_2` without validation.
pub(crate) fn weighted_group_l2(beta: &[f64], structure: &GroupStructure, weights: &[f64]) -> f64 {
    structure
        .groups
        .iter()
        .zip(weights)
        .map(|(g, d)| d * g.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt())
        .sum()
}

/// Latent vectors `v^l` (supported on `G^l`) summing to a coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentDecomposition {
    pub vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl LatentDecomposition {
    pub fn reconstruct(&self) -> Vec<f64> {
        let p = self.vectors.first().map_or(0, Vec::len);
        let mut beta = vec![0.0; p];
        for v in &self.vectors {
            for (b, x) in beta.iter_mut().zip(v) {
                *b += x;
            }
        }
        beta
    }

    pub fn penalty(&self) -> f64 {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(v, d)| d * v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum()
    }

    /// Indices of the groups whose latent vector is nonzero.
    pub fn active_groups(&self) -> Vec<usize> {
        self.vectors
            .iter()
            .enumerate()
            .filter(|(_, v)| v.iter().any(|&x| x != 0.0))
            .map(|(l, _)| l)
            .collect()
    }
}

const OMEGA_TOL: f64 = 1e-8;
const OMEGA_MAX_ITERS: usize = 200_000;

/// The latent overlapping-group norm
/// `Ω(β) = min Σ_l d_l‖v^l‖_2  s.t.  Σ_l v^l = β, supp(v^l) ⊂ G^l`.
///
/// Solved on the duplicated-covariate representation by Douglas–Rachford
/// splitting between the block-shrinkage prox and the projection onto
/// `{u : collapse(u) = β}`; iterations stop once a dual certificate closes the
/// gap to `1e-8` (relative).
pub fn omega_overlap(beta: &[f64], structure: &GroupStructure, d: &[f64]) -> Result<(f64, LatentDecomposition)> {
    if beta.len() != structure.p {
        return Err(GwglError::dim(format!(
            "coefficient vector has length {} but structure has p={}",
            beta.len(),
            structure.p
        )));
    }
    if d.len() != structure.num_groups() {
        return Err(GwglError::dim(format!(
            "{} group weights for {} groups",
            d.len(),
            structure.num_groups()
        )));
    }
    if d.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(GwglError::input("latent group weights must be positive"));
    }
    let dup = Duplication::new(structure);
    if let Some(j) = (0..structure.p).find(|&j| beta[j] != 0.0 && dup.multiplicity[j] == 0) {
        return Err(GwglError::numerical(format!(
            "infeasible decomposition: nonzero coefficient {j} is covered by no group"
        )));
    }
    let zero = || LatentDecomposition {
        vectors: vec![vec![0.0; structure.p]; structure.num_groups()],
        weights: d.to_vec(),
    };
    if beta.iter().all(|&b| b == 0.0) {
        return Ok((0.0, zero()));
    }
    if dup.multiplicity.iter().all(|&m| m <= 1) {
        // unique decomposition
        let mut dec = zero();
        for (l, g) in structure.groups.iter().enumerate() {
            for &j in g {
                dec.vectors[l][j] = beta[j];
            }
        }
        return Ok((dec.penalty(), dec));
    }

    let project = |z: &[f64]| -> Vec<f64> {
        let resid: Vec<f64> = dup
            .collapse(z)
            .iter()
            .zip(beta)
            .zip(&dup.multiplicity)
            .map(|((c, b), &m)| if m > 0 { (c - b) / m as f64 } else { 0.0 })
            .collect();
        z.iter().zip(&dup.source).map(|(zk, &j)| zk - resid[j]).collect()
    };
    let norm_beta = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let gamma = norm_beta / dmax;
    let thresholds: Vec<f64> = d.iter().map(|w| gamma * w).collect();

    let mut z = project(&vec![0.0; dup.expanded_dim()]);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for iter in 0..OMEGA_MAX_ITERS {
        let x = project(&z);
        let reflected: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - b).collect();
        let y = block_shrink(&reflected, &dup.expanded, &thresholds);
        for k in 0..z.len() {
            z[k] += y[k] - x[k];
        }
        if iter % 10 == 0 {
            let upper = weighted_group_l2(&x, &dup.expanded, d);
            // (x − z)/γ lies in range(Aᵀ) and, at the fixed point, in ∂g(x).
            let dir: Vec<f64> = x.iter().zip(&z).map(|(a, b)| (a - b) / gamma).collect();
            let alpha: Vec<f64> = dup
                .collapse(&dir)
                .iter()
                .zip(&dup.multiplicity)
                .map(|(s, &m)| if m > 0 { s / m as f64 } else { 0.0 })
                .collect();
            let spread = dup.spread(&alpha);
            let scale = dup
                .expanded
                .groups
                .iter()
                .zip(d)
                .map(|(g, w)| g.iter().map(|&k| spread[k] * spread[k]).sum::<f64>().sqrt() / w)
                .fold(0.0, f64::max)
                .max(1.0);
            let lower = alpha.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() / scale;
            if best.as_ref().is_none_or(|(v, _)| upper < *v) {
                best = Some((upper, y.clone()));
            }
            if upper - lower <= OMEGA_TOL * upper.max(1.0) {
                break;
            }
        }
    }
    let (_, sparse) = best.expect("at least one iterate");
    let dec = reconstruct_exact(&sparse, &dup, beta, d);
    Ok((dec.penalty(), dec))
}

/// Turns a group-sparse expanded vector into latent vectors that sum to `beta`
/// by assigning each coordinate's residual to one group containing it,
/// preferring groups that are already active.
fn reconstruct_exact(u: &[f64], dup: &Duplication, beta: &[f64], d: &[f64]) -> LatentDecomposition {
    let mut vectors = dup.latent_vectors(u);
    let active: Vec<bool> = vectors.iter().map(|v| v.iter().any(|&x| x != 0.0)).collect();
    let groups = &dup.expanded.groups;
    for j in 0..beta.len() {
        let holders: Vec<usize> = (0..groups.len())
            .filter(|&l| groups[l].iter().any(|&k| dup.source[k] == j))
            .collect();
        if holders.is_empty() {
            continue;
        }
        let target = holders.iter().copied().find(|&l| active[l]).unwrap_or(holders[0]);
        let others: f64 = holders.iter().filter(|&&l| l != target).map(|&l| vectors[l][j]).sum();
        vectors[target][j] = beta[j] - others;
    }
    LatentDecomposition {
        vectors,
        weights: d.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn two_inf_single_group() {
        let s = GroupStructure::from_sizes(&[2]).unwrap();
        let n = WeightedGroupNorm::two_inf(&s, None);
        assert!((group_norm_qt(&[3.0, 4.0], &s, &n).unwrap() - 5.0 / S2).abs() < 1e-14);
        assert_eq!(group_norm_qt(&[0.0, 0.0], &s, &n).unwrap(), 0.0);
    }

    #[test]
    fn two_inf_with_response_block() {
        let s = GroupStructure::from_sizes(&[2, 3]).unwrap();
        let n = WeightedGroupNorm::two_inf(&s, Some(1.0));
        let z = [1.0, 0.0, 0.0, 2.0, 0.0, 3.0];
        assert_eq!(group_norm_qt(&z, &s, &n).unwrap(), 3.0);
        assert!(group_norm_qt(&z[..5], &s, &n).is_err());
    }

    #[test]
    fn dual_closed_forms() {
        let s = GroupStructure::from_sizes(&[2]).unwrap();
        let n = WeightedGroupNorm::two_inf(&s, Some(2.0));
        let v = dual_norm_group(&[3.0, 4.0, 1.0], &s, &n).unwrap();
        assert!((v - (S2 * 5.0 + 0.5)).abs() < 1e-12);

        let l2 = WeightedGroupNorm::new(2.0, 2.0, vec![1.0], None).unwrap();
        assert!((dual_norm_group(&[3.0, 4.0], &s, &l2).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn conjugates() {
        assert_eq!(conjugate_exponent(1.0), f64::INFINITY);
        assert_eq!(conjugate_exponent(f64::INFINITY), 1.0);
        assert_eq!(conjugate_exponent(2.0), 2.0);
        assert!((conjugate_exponent(3.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_norms_rejected() {
        assert!(WeightedGroupNorm::new(0.5, 2.0, vec![1.0], None).is_err());
        assert!(WeightedGroupNorm::new(2.0, 2.0, vec![0.0], None).is_err());
        assert!(WeightedGroupNorm::new(2.0, 2.0, vec![1.0], Some(-1.0)).is_err());
    }

    #[test]
    fn glasso_values() {
        let s = GroupStructure::from_sizes(&[2, 3]).unwrap();
        assert_eq!(glasso_penalty(&[0.0; 5], &s).unwrap(), 0.0);
        let v = glasso_penalty(&[3.0, 4.0, 0.0, 0.0, 0.0], &s).unwrap();
        assert!((v - S2 * 5.0).abs() < 1e-12);
        let o = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], true).unwrap();
        assert!(glasso_penalty(&[1.0, 1.0, 1.0], &o).is_err());
    }

    #[test]
    fn omega_zero_and_partition() {
        let s = GroupStructure::from_sizes(&[2, 1]).unwrap();
        let (v, dec) = omega_overlap(&[0.0; 3], &s, &[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert!(dec.vectors.iter().flatten().all(|&x| x == 0.0));
        let beta = [1.0, -2.0, 0.5];
        let (v, dec) = omega_overlap(&beta, &s, &s.sqrt_sizes()).unwrap();
        assert!((v - glasso_penalty(&beta, &s).unwrap()).abs() < 1e-12);
        assert_eq!(dec.reconstruct(), beta.to_vec());
    }

    #[test]
    fn omega_overlapping_chain() {
        // v¹ = (1, a, 0), v² = (0, 1 − a, 0): √(1+a²) + |1−a| is minimized at a = 1.
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], true).unwrap();
        let (v, dec) = omega_overlap(&[1.0, 1.0, 0.0], &s, &[1.0, 1.0]).unwrap();
        assert!((v - S2).abs() < 1e-7, "{v}");
        assert_eq!(dec.reconstruct(), vec![1.0, 1.0, 0.0]);
        assert_eq!(dec.vectors[0][2], 0.0);
        assert_eq!(dec.vectors[1][0], 0.0);
    }

    #[test]
    fn omega_uncovered_nonzero_is_infeasible() {
        let s = GroupStructure {
            p: 3,
            groups: vec![vec![0, 1]],
            overlapping: true,
        };
        assert!(omega_overlap(&[1.0, 0.0, 2.0], &s, &[1.0]).unwrap_err().is_numerical());
    }

    fn random_norm() -> impl Strategy<Value = (f64, f64)> {
        let e = prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..6.0];
        (e.clone(), e)
    }

    proptest! {
        #[test]
        fn holder_inequality(
            (q, t) in random_norm(),
            v in proptest::collection::vec(-3.0f64..3.0, 5),
            x in proptest::collection::vec(-3.0f64..3.0, 5),
            w in proptest::collection::vec(0.2f64..3.0, 2),
        ) {
            let s = GroupStructure::from_sizes(&[2, 3]).unwrap();
            let n = WeightedGroupNorm::new(q, t, w, None).unwrap();
            let nx = group_norm_qt(&x, &s, &n).unwrap();
            prop_assume!(nx > 1e-9);
            let inner: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / nx;
            prop_assert!(inner <= dual_norm_group(&v, &s, &n).unwrap() + 1e-9);
        }

        #[test]
        fn norm_axioms(
            (q, t) in random_norm(),
            a in proptest::collection::vec(-3.0f64..3.0, 5),
            b in proptest::collection::vec(-3.0f64..3.0, 5),
            c in -4.0f64..4.0,
        ) {
            let s = GroupStructure::from_sizes(&[2, 3]).unwrap();
            let n = WeightedGroupNorm::new(q, t, vec![0.7, 1.3], None).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            for f in [group_norm_qt, dual_norm_group] {
                let (na, nb) = (f(&a, &s, &n).unwrap(), f(&b, &s, &n).unwrap());
                prop_assert!(f(&sum, &s, &n).unwrap() <= na + nb + 1e-10);
                prop_assert!((f(&scaled, &s, &n).unwrap() - c.abs() * na).abs() <= 1e-9 * (1.0 + na));
            }
            let (ga, gb) = (glasso_penalty(&a, &s).unwrap(), glasso_penalty(&b, &s).unwrap());
            prop_assert!(glasso_penalty(&sum, &s).unwrap() <= ga + gb + 1e-10);
            let two_inf = WeightedGroupNorm::two_inf(&s, None);
            prop_assert!((dual_norm_group(&a, &s, &two_inf).unwrap() - ga).abs() < 1e-12);
        }

        #[test]
        fn omega_is_a_norm(
            a in proptest::collection::vec(-2.0f64..2.0, 4),
            b in proptest::collection::vec(-2.0f64..2.0, 4),
            c in -3.0f64..3.0,
        ) {
            let s = GroupStructure::new(4, vec![vec![0, 1, 2], vec![1, 3], vec![2, 3]], true).unwrap();
            let d = [1.0, 0.8, 1.5];
            let om = |x: &[f64]| omega_overlap(x, &s, &d).unwrap().0;
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let scaled: Vec<f64> = a.iter().map(|x| c * x).collect();
            let (oa, ob) = (om(&a), om(&b));
            prop_assert!(om(&sum) <= oa + ob + 1e-6 * (1.0 + oa + ob));
            prop_assert!((om(&scaled) - c.abs() * oa).abs() <= 1e-6 * (1.0 + c.abs() * oa));
            let (_, dec) = omega_overlap(&a, &s, &d).unwrap();
            let rec = dec.reconstruct();
            for (x, y) in rec.iter().zip(&a) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
