//! Self-contained numerical checks of the estimator's theory, runnable from
//! the CLI: the mixture ratio of W1, the dual group norm, the DRO relaxation
//! bound and the grouping effect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, standardize, SyntheticSpec};
use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::metrics::{grouping_bound_check, PairCheck};
use crate::norms::{dual_norm_group, lp_norm, WeightedGroupNorm};
use crate::ot::{
    classification_metric, dro_worstcase, mixture_ratio, regression_metric, relaxation_bound, DiscreteDistribution,
    GroundMetric,
};
use crate::solvers::{FitConfig, Loss, Model};
use crate::tuning::{tuning_grid_scaled, GridScale};

pub const MIXTURE_TOL: f64 = 1e-9;
pub const DUAL_NORM_TOL: f64 = 1e-9;
pub const DRO_TOL: f64 = 1e-8;

fn random_distribution(rng: &mut ChaCha8Rng, k: usize, dim: usize) -> Result<DiscreteDistribution> {
    let support: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = probs[..k - 1].iter().sum();
    probs[k - 1] = 1.0 - head;
    DiscreteDistribution::new(support, probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureCheck {
    pub q: f64,
    pub seed: u64,
    pub support_p: usize,
    pub support_out: usize,
    pub dim: usize,
    pub ratio: f64,
    pub expected: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Draws `P` and `P_out` with at most `max_support` atoms each and compares
/// `W1(P_out, P_mix)/W1(P, P_mix)` with `(1 − q)/q`.
pub fn mixture_check(q: f64, seed: u64, max_support: usize, dim: usize) -> Result<MixtureCheck> {
    if max_support == 0 || dim == 0 {
        return Err(GwglError::input("support size and dimension must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k1 = rng.random_range(1..=max_support);
    let k2 = rng.random_range(1..=max_support);
    let p = random_distribution(&mut rng, k1, dim)?;
    let p_out = random_distribution(&mut rng, k2, dim)?;
    let ratio = mixture_ratio(&p, &p_out, q, &GroundMetric::Lp(2.0))?;
    let expected = (1.0 - q) / q;
    let abs_error = (ratio - expected).abs();
    Ok(MixtureCheck {
        q,
        seed,
        support_p: k1,
        support_out: k2,
        dim,
        ratio,
        expected,
        abs_error,
        tolerance: MIXTURE_TOL,
        pass: abs_error <= MIXTURE_TOL,
    })
}

fn random_partition(rng: &mut ChaCha8Rng, p: usize) -> Result<GroupStructure> {
    let mut sizes = Vec::new();
    let mut left = p;
    while left > 0 {
        let s = rng.random_range(1..=left);
        sizes.push(s);
        left -= s;
    }
    GroupStructure::from_sizes(&sizes)
}

/// `⟨v, z⟩/‖z‖` at the maximizer built group by group: within a group the
/// Hölder-tight direction for the inner exponent, across groups the
/// Hölder-tight allocation for the outer exponent.
pub fn dual_norm_by_maximizer(v: &[f64], structure: &GroupStructure, norm: &WeightedGroupNorm) -> Result<f64> {
    let qs = crate::norms::conjugate_exponent(norm.q);
    let ts = crate::norms::conjugate_exponent(norm.t);
    // unit-norm (weighted) direction per group, with its value c_l = ⟨v^l, u^l⟩
    let mut dirs = Vec::new();
    let mut c = Vec::new();
    for (g, w) in structure.groups.iter().zip(&norm.weights) {
        let vl: Vec<f64> = g.iter().map(|&i| v[i]).collect();
        let mut u: Vec<f64> = if qs.is_infinite() {
            // q = 1: all mass on one largest coordinate
            let k = (0..vl.len()).fold(0, |b, i| if vl[i].abs() > vl[b].abs() { i } else { b });
            let mut u = vec![0.0; vl.len()];
            u[k] = vl[k].signum();
            u
        } else {
            vl.iter().map(|x| x.signum() * x.abs().powf(qs - 1.0)).collect()
        };
        let len = lp_norm(&u, norm.q);
        if len > 0.0 {
            u.iter_mut().for_each(|x| *x /= len * w);
        }
        c.push(vl.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>());
        dirs.push(u);
    }
    if let Some(m) = norm.response_weight {
        let y = v[structure.p];
        dirs.push(vec![y.signum() / m]);
        c.push(y.abs() / m);
    }
    let a: Vec<f64> = if ts.is_infinite() {
        let k = (0..c.len()).fold(0, |b, i| if c[i] > c[b] { i } else { b });
        (0..c.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    } else if norm.t.is_infinite() {
        vec![1.0; c.len()]
    } else {
        c.iter().map(|x| x.powf(ts - 1.0)).collect()
    };
    let mut z = vec![0.0; v.len()];
    for (l, g) in structure.groups.iter().enumerate() {
        for (k, &i) in g.iter().enumerate() {
            z[i] = a[l] * dirs[l][k];
        }
    }
    if norm.response_weight.is_some() {
        z[structure.p] = a[c.len() - 1] * dirs[c.len() - 1][0];
    }
    let size = crate::norms::group_norm_qt(&z, structure, norm)?;
    if size == 0.0 {
        return Ok(0.0);
    }
    Ok(v.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNormCheck {
    pub seed: u64,
    pub vectors: usize,
    pub max_dim: usize,
    pub max_abs_error: f64,
    pub failures: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares [`dual_norm_group`] with [`dual_norm_by_maximizer`] on random
/// vectors, partitions, weights and exponents.
pub fn dual_norm_check(seed: u64, vectors: usize, max_dim: usize) -> Result<DualNormCheck> {
    if max_dim == 0 {
        return Err(GwglError::input("dimension bound must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exponents = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
    let mut max_abs_error = 0.0f64;
    let mut failures = 0;
    for _ in 0..vectors {
        let p = rng.random_range(1..=max_dim);
        let structure = random_partition(&mut rng, p)?;
        let q = exponents[rng.random_range(0..exponents.len())];
        let t = exponents[rng.random_range(0..exponents.len())];
        let weights = (0..structure.num_groups())
            .map(|_| rng.random_range(0.2..3.0))
            .collect();
        let response_weight = rng.random_bool(0.3).then(|| rng.random_range(0.2..3.0));
        let norm = WeightedGroupNorm::new(q, t, weights, response_weight)?;
        let len = p + usize::from(response_weight.is_some());
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let got = dual_norm_group(&v, &structure, &norm)?;
        let want = dual_norm_by_maximizer(&v, &structure, &norm)?;
        let err = (got - want).abs();
        max_abs_error = max_abs_error.max(err);
        if err > DUAL_NORM_TOL * want.max(1.0) {
            failures += 1;
        }
    }
    Ok(DualNormCheck {
        seed,
        vectors,
        max_dim,
        max_abs_error,
        failures,
        tolerance: DUAL_NORM_TOL,
        pass: failures == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroInstance {
    pub loss: Loss,
    pub epsilon: f64,
    pub worst_case: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroBoundCheck {
    pub seed: u64,
    pub instances: Vec<DroInstance>,
    /// Largest `worst_case − bound`.
    pub max_excess: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Random tiny instances (at most 3 samples, 6 support points), alternating
/// LAD and logloss, comparing the exact worst case with the relaxation.
pub fn dro_bound_check(seed: u64, instances: usize) -> Result<DroBoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(instances);
    for trial in 0..instances {
        let loss = if trial % 2 == 0 { Loss::Lad } else { Loss::Logloss };
        let p = rng.random_range(1..=3);
        let structure = random_partition(&mut rng, p)?;
        let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let n_support = rng.random_range(1..=6);
        let mut support: Vec<Vec<f64>> = Vec::with_capacity(n_support);
        while support.len() < n_support {
            let mut z: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            z.push(match loss {
                Loss::Lad => rng.random_range(-2.0..2.0),
                _ => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            });
            if !support.contains(&z) {
                support.push(z);
            }
        }
        let n_samples = rng.random_range(1..=n_support.min(3));
        let samples: Vec<Vec<f64>> = (0..n_samples)
            .map(|_| support[rng.random_range(0..n_support)].clone())
            .collect();
        let epsilon = rng.random_range(0.0..1.0);
        let metric = match loss {
            Loss::Lad => regression_metric(&structure, 1.0),
            _ => classification_metric(&structure),
        };
        let worst_case = dro_worstcase(&samples, &beta, epsilon, &support, loss, &metric)?;
        let bound = relaxation_bound(&samples, &beta, epsilon, loss, &structure, 1.0)?;
        out.push(DroInstance {
            loss,
            epsilon,
            worst_case,
            bound,
            pass: worst_case <= bound + DRO_TOL,
        });
    }
    let max_excess = out
        .iter()
        .map(|i| i.worst_case - i.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DroBoundCheck {
        seed,
        pass: out.iter().all(|i| i.pass),
        instances: out,
        max_excess,
        tolerance: DRO_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingFit {
    pub model: Model,
    pub seed: u64,
    pub epsilon: f64,
    pub converged: bool,
    pub pairs_checked: usize,
    /// Largest `d / bound` over checked pairs.
    pub max_ratio: f64,
    pub failures: Vec<PairCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingCheck {
    pub fits: Vec<GroupingFit>,
    pub pass: bool,
}

/// Draws a standardized synthetic dataset with the default 4-group design,
/// labels `sign(y)` for the logloss model.
pub fn grouping_design(seed: u64, n: usize, binary: bool) -> Result<(crate::data::Dataset, GroupStructure)> {
    let spec = SyntheticSpec {
        group_sizes: vec![1, 3, 5, 7],
        rho_w: 0.8,
        snr: Some(1.0),
        noise_var: None,
        outlier_prob: 0.3,
        n,
        seed,
        rho_jitter: Some([0.2, 0.4]),
    };
    let ds = standardize(&generate_synthetic(&spec)?)?;
    let ds = if binary { ds.binarize() } else { ds };
    Ok((ds, spec.structure()?))
}

/// Fits GWGL-LR and GWGL-LG on `fits` seeded datasets each, with ε drawn from
/// the lower half of the tuning grid, and checks every eligible pair.
pub fn grouping_check(seed: u64, fits: usize, n: usize) -> Result<GroupingCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for model in [Model::GwglLr, Model::GwglLg] {
        for _ in 0..fits {
            let data_seed = rng.random::<u32>() as u64;
            let (ds, structure) = grouping_design(data_seed, n, model == Model::GwglLg)?;
            let grid = tuning_grid_scaled(ds.x.view(), ds.y.view(), &structure, model, 50, GridScale::Mean)?;
            let epsilon = grid[rng.random_range(0..grid.len() / 2)];
            let fit = model.fit(ds.x.view(), ds.y.view(), &structure, &FitConfig::with_epsilon(epsilon))?;
            let report = grouping_bound_check(&fit, ds.x.view(), &structure, epsilon)?;
            let max_ratio = report
                .pairs
                .iter()
                .map(|p| if p.bound > 0.0 { p.d / p.bound } else { 0.0 })
                .fold(0.0, f64::max);
            out.push(GroupingFit {
                model,
                seed: data_seed,
                epsilon,
                converged: fit.converged,
                pairs_checked: report.pairs.len(),
                max_ratio,
                failures: report.pairs.into_iter().filter(|p| !p.pass).collect(),
            });
        }
    }
    Ok(GroupingCheck {
        pass: out.iter().all(|f| f.failures.is_empty()),
        fits: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixture_ratio_is_four_at_q_02() {
        let c = mixture_check(0.2, 1, 10, 3).unwrap();
        assert!(c.pass, "{c:?}");
        assert!((c.ratio - 4.0).abs() < 1e-9);
    }

    #[test]
    fn maximizer_agrees_with_closed_form() {
        let c = dual_norm_check(5, 200, 12).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn dro_bound_small_run() {
        let c = dro_bound_check(2, 20).unwrap();
        assert!(c.pass, "{c:?}");
        assert_eq!(c.instances.len(), 20);
    }
}
