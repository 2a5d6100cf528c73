//! Worst-case expected loss over a Wasserstein ball with finite support.

use super::simplex::{self, LinearProgram, LpOutcome};
use super::wasserstein::GroundMetric;
use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::norms::{dual_norm_group, WeightedGroupNorm};
use crate::solvers::Loss;

/// Ground metric for regression: the (2,∞) group norm on predictors with
/// weight `m` on the response.
pub fn regression_metric(structure: &GroupStructure, m: f64) -> GroundMetric {
    GroundMetric::Group {
        structure: structure.clone(),
        norm: WeightedGroupNorm::two_inf(structure, Some(m)),
    }
}

/// Ground metric for classification: the (2,∞) group norm on predictors and
/// infinite cost between different labels.
pub fn classification_metric(structure: &GroupStructure) -> GroundMetric {
    GroundMetric::LabelAware(Box::new(GroundMetric::Group {
        structure: structure.clone(),
        norm: WeightedGroupNorm::two_inf(structure, None),
    }))
}

fn point_loss(point: &[f64], beta: &[f64], loss: Loss) -> f64 {
    let (x, y) = point.split_at(point.len() - 1);
    let pred: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
    loss.pointwise(y[0], pred)
}

fn check_points(points: &[Vec<f64>], beta: &[f64], what: &str) -> Result<()> {
    if points.is_empty() {
        return Err(GwglError::input(format!("{what} is empty")));
    }
    for pt in points {
        if pt.len() != beta.len() + 1 {
            return Err(GwglError::dim(format!(
                "{what} point has length {} but (x, y) needs {}",
                pt.len(),
                beta.len() + 1
            )));
        }
        if pt.iter().any(|v| !v.is_finite()) {
            return Err(GwglError::input(format!("{what} point with non-finite coordinate")));
        }
    }
    Ok(())
}

/// `sup E^Q[loss_β]` over distributions `Q` on `support` with
/// `W1(Q, P̂_N) ≤ epsilon`, where `P̂_N` is uniform on `samples`.
///
/// Points are `(x, y)` pairs with the response last. The program is solved
/// exactly in the plan variables `π_ik` (mass sent from sample `i` to support
/// point `k`): each sample ships `1/N`, and the total transport cost is at
/// most `epsilon`.
pub fn dro_worstcase(
    samples: &[Vec<f64>],
    beta: &[f64],
    epsilon: f64,
    support: &[Vec<f64>],
    loss: Loss,
    metric: &GroundMetric,
) -> Result<f64> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(GwglError::input(format!("epsilon must be >= 0, got {epsilon}")));
    }
    check_points(samples, beta, "sample set")?;
    check_points(support, beta, "support set")?;
    if let Some(i) = samples.iter().position(|s| !support.contains(s)) {
        return Err(GwglError::input(format!(
            "sample {i} is not a point of the support set"
        )));
    }
    let n = samples.len();
    let losses: Vec<f64> = support.iter().map(|z| point_loss(z, beta, loss)).collect();

    let mut cells = Vec::new();
    let mut costs = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        for (k, z) in support.iter().enumerate() {
            let c = metric.distance(s, z)?;
            if c.is_finite() {
                cells.push((i, k));
                costs.push(c);
            }
        }
    }
    // columns: plan cells, then the budget slack
    let ncols = cells.len() + 1;
    let mut a = vec![vec![0.0; ncols]; n + 1];
    for (col, (&(i, _), &c)) in cells.iter().zip(&costs).enumerate() {
        a[i][col] = 1.0;
        a[n][col] = c;
    }
    a[n][ncols - 1] = 1.0;
    let mut b = vec![1.0 / n as f64; n];
    b.push(epsilon);
    let mut c: Vec<f64> = cells.iter().map(|&(_, k)| -losses[k]).collect();
    c.push(0.0);

    match simplex::solve(&LinearProgram { a, b, c })? {
        LpOutcome::Optimal { value, .. } => Ok(-value),
        LpOutcome::Infeasible => Err(GwglError::numerical("worst-case program is infeasible")),
        LpOutcome::Unbounded => Err(GwglError::numerical("worst-case program is unbounded")),
    }
}

/// Upper bound on [`dro_worstcase`] from the dual-norm relaxation:
/// empirical loss plus `ε·‖(−β, 1)‖_*` for LAD under [`regression_metric`],
/// or plus `ε·‖β‖_*` for logloss under [`classification_metric`].
pub fn relaxation_bound(
    samples: &[Vec<f64>],
    beta: &[f64],
    epsilon: f64,
    loss: Loss,
    structure: &GroupStructure,
    m: f64,
) -> Result<f64> {
    check_points(samples, beta, "sample set")?;
    let empirical = samples.iter().map(|s| point_loss(s, beta, loss)).sum::<f64>() / samples.len() as f64;
    let lipschitz = match loss {
        Loss::Lad => {
            let mut v: Vec<f64> = beta.iter().map(|b| -b).collect();
            v.push(1.0);
            dual_norm_group(&v, structure, &WeightedGroupNorm::two_inf(structure, Some(m)))?
        }
        Loss::Logloss => dual_norm_group(beta, structure, &WeightedGroupNorm::two_inf(structure, None))?,
        Loss::L2 => return Err(GwglError::input("the squared loss has no Lipschitz relaxation")),
    };
    Ok(empirical + epsilon * lipschitz)
}
