use serde::{Deserialize, Serialize};

use super::simplex::{self, LinearProgram, LpOutcome};
use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::norms::{group_norm_qt, lp_norm, WeightedGroupNorm};

const MASS_TOL: f64 = 1e-12;

/// Finitely supported probability distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub support: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        let d = DiscreteDistribution { support, probs };
        d.validate()?;
        Ok(d)
    }

    /// Equal weight on every point.
    pub fn empirical(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(point: Vec<f64>) -> Self {
        DiscreteDistribution {
            support: vec![point],
            probs: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() {
            return Err(GwglError::input("distribution has empty support"));
        }
        if self.support.len() != self.probs.len() {
            return Err(GwglError::dim(format!(
                "{} support points but {} weights",
                self.support.len(),
                self.probs.len()
            )));
        }
        let d = self.dim();
        if self.support.iter().any(|s| s.len() != d) {
            return Err(GwglError::dim("support points have different dimensions"));
        }
        if self.support.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GwglError::input("support point with non-finite coordinate"));
        }
        if self.probs.iter().any(|&w| !(w >= 0.0)) {
            return Err(GwglError::input("negative probability weight"));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(GwglError::input(format!(
                "probability weights sum to {total}, not 1 (tolerance {MASS_TOL:e})"
            )));
        }
        Ok(())
    }

    /// `weight·self + (1 − weight)·other`, with identical support points merged.
    pub fn mix(&self, other: &DiscreteDistribution, weight: f64) -> DiscreteDistribution {
        let mut support: Vec<Vec<f64>> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        let mut add = |pt: &Vec<f64>, w: f64| match support.iter().position(|s| s == pt) {
            Some(k) => probs[k] += w,
            None => {
                support.push(pt.clone());
                probs.push(w);
            }
        };
        for (pt, w) in self.support.iter().zip(&self.probs) {
            add(pt, weight * w);
        }
        for (pt, w) in other.support.iter().zip(&other.probs) {
            add(pt, (1.0 - weight) * w);
        }
        DiscreteDistribution { support, probs }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: DiscreteDistribution =
            serde_json::from_str(text).map_err(|e| GwglError::Parse(format!("distribution JSON: {e}")))?;
        d.validate()?;
        Ok(d)
    }
}

/// Ground metric on the support space.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundMetric {
    /// Plain ℓ_q norm of the difference.
    Lp(f64),
    /// Weighted (q,t) group norm of the difference; a response weight in the
    /// norm applies to the trailing coordinate.
    Group {
        structure: GroupStructure,
        norm: WeightedGroupNorm,
    },
    /// Trailing coordinate is a class label: points with different labels are
    /// infinitely far apart, otherwise the inner metric applies to the rest.
    LabelAware(Box<GroundMetric>),
}

impl GroundMetric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(GwglError::dim("points of different dimensions"));
        }
        match self {
            GroundMetric::Lp(q) => Ok(lp_norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>(), *q)),
            GroundMetric::Group { structure, norm } => {
                let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                group_norm_qt(&diff, structure, norm)
            }
            GroundMetric::LabelAware(inner) => {
                let k = a.len();
                if k == 0 {
                    return Err(GwglError::dim("label-aware metric needs a label coordinate"));
                }
                if a[k - 1] != b[k - 1] {
                    Ok(f64::INFINITY)
                } else {
                    inner.distance(&a[..k - 1], &b[..k - 1])
                }
            }
        }
    }
}

/// Coupling between two discrete distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub mass: Vec<Vec<f64>>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.mass.first().map_or(0, Vec::len);
        (0..n).map(|j| self.mass.iter().map(|r| r[j]).sum()).collect()
    }
}

/// Order-one Wasserstein distance by solving the transportation LP exactly.
/// Pairs at infinite ground distance are excluded from the plan; if no plan
/// remains feasible the distance is infinite and an error is returned.
pub fn w1_discrete(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    metric: &GroundMetric,
) -> Result<(f64, TransportPlan)> {
    p.validate()?;
    q.validate()?;
    if p.dim() != q.dim() {
        return Err(GwglError::dim(format!(
            "distributions live in dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    let (m, n) = (p.support.len(), q.support.len());
    let mut cells = Vec::new();
    let mut cost = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let c = metric.distance(&p.support[i], &q.support[j])?;
            if c.is_finite() {
                cells.push((i, j));
                cost.push(c);
            }
        }
    }
    let mut a = vec![vec![0.0; cells.len()]; m + n];
    for (k, &(i, j)) in cells.iter().enumerate() {
        a[i][k] = 1.0;
        a[m + j][k] = 1.0;
    }
    let mut b = p.probs.clone();
    b.extend_from_slice(&q.probs);
    let lp = LinearProgram { a, b, c: cost };
    match simplex::solve(&lp)? {
        LpOutcome::Optimal { x, value } => {
            let mut mass = vec![vec![0.0; n]; m];
            for (&(i, j), v) in cells.iter().zip(x) {
                mass[i][j] = v;
            }
            Ok((value, TransportPlan { mass }))
        }
        LpOutcome::Infeasible => Err(GwglError::numerical(
            "no transport plan with finite cost: the Wasserstein distance is infinite",
        )),
        LpOutcome::Unbounded => Err(GwglError::numerical("transport LP reported unbounded")),
    }
}

/// `W1(P_out, P_mix) / W1(P, P_mix)` for `P_mix = q·P_out + (1 − q)·P`.
pub fn mixture_ratio(
    p: &DiscreteDistribution,
    p_out: &DiscreteDistribution,
    q: f64,
    metric: &GroundMetric,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(GwglError::input(format!(
            "mixture probability must lie in (0, 1), got {q}"
        )));
    }
    let mix = p_out.mix(p, q);
    let (num, _) = w1_discrete(p_out, &mix, metric)?;
    let (den, _) = w1_discrete(p, &mix, metric)?;
    if den == 0.0 {
        return Err(GwglError::numerical(
            "W1(P, P_mix) = 0: P and P_out coincide, so the mixture ratio is undefined",
        ));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(points: &[&[f64]], probs: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(points.iter().map(|p| p.to_vec()).collect(), probs.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions_are_at_zero() {
        let p = dist(&[&[0.0, 1.0], &[2.0, -1.0]], &[0.3, 0.7]);
        let (c, plan) = w1_discrete(&p, &p, &GroundMetric::Lp(2.0)).unwrap();
        assert!(c.abs() < 1e-15);
        for (a, b) in plan.row_sums().iter().zip(&p.probs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn point_masses() {
        let a = DiscreteDistribution::point_mass(vec![0.0, 0.0]);
        let b = DiscreteDistribution::point_mass(vec![3.0, 4.0]);
        let (c, _) = w1_discrete(&a, &b, &GroundMetric::Lp(2.0)).unwrap();
        assert!((c - 5.0).abs() < 1e-12);
        let (c1, _) = w1_discrete(&a, &b, &GroundMetric::Lp(1.0)).unwrap();
        assert!((c1 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn mass_must_sum_to_one() {
        assert!(DiscreteDistribution::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(DiscreteDistribution::new(vec![vec![0.0], vec![1.0]], vec![1.2, -0.2]).is_err());
    }

    #[test]
    fn label_metric_forbids_cross_label_transport() {
        let metric = GroundMetric::LabelAware(Box::new(GroundMetric::Lp(2.0)));
        let p = DiscreteDistribution::point_mass(vec![0.0, 1.0]);
        let q = DiscreteDistribution::point_mass(vec![0.0, -1.0]);
        assert!(w1_discrete(&p, &q, &metric).unwrap_err().is_numerical());
        let r = DiscreteDistribution::point_mass(vec![2.0, 1.0]);
        assert!((w1_discrete(&p, &r, &metric).unwrap().0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_ratio_values() {
        let p = dist(&[&[0.0], &[1.0]], &[0.5, 0.5]);
        let out = dist(&[&[5.0]], &[1.0]);
        let m = GroundMetric::Lp(1.0);
        assert!((mixture_ratio(&p, &out, 0.5, &m).unwrap() - 1.0).abs() < 1e-9);
        assert!((mixture_ratio(&p, &out, 0.2, &m).unwrap() - 4.0).abs() < 1e-9);
        assert!(mixture_ratio(&p, &p, 0.2, &m).unwrap_err().is_numerical());
        assert!(mixture_ratio(&p, &out, 1.0, &m).is_err());
    }

    #[test]
    fn mixing_merges_duplicates() {
        let p = dist(&[&[0.0], &[1.0]], &[0.5, 0.5]);
        let q = dist(&[&[1.0], &[2.0]], &[0.5, 0.5]);
        let m = p.mix(&q, 0.5);
        assert_eq!(m.support.len(), 3);
        assert!((m.probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn distribution_json() {
        let p = dist(&[&[0.0, 1.0]], &[1.0]);
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["support"], serde_json::json!([[0.0, 1.0]]));
        assert_eq!(DiscreteDistribution::from_json(&p.to_json()).unwrap(), p);
    }
}
