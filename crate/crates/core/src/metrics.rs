//! Prediction and estimation metrics, and the grouping-effect diagnostic.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::linalg::median;
use crate::solvers::FitResult;

/// Median of `|y − ŷ|`; for an even count, the mean of the two middle values.
pub fn mad(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(GwglError::dim(format!(
            "{} responses but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(GwglError::input("MAD of an empty sample"));
    }
    let mut r: Vec<f64> = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).collect();
    Ok(median(&mut r))
}

/// Relative risk, relative test error and proportion of variance explained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub rr: f64,
    pub rte: f64,
    pub pve: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleScores {
    pub rr: f64,
    pub rte: f64,
    pub pve: f64,
    /// Scores of the true coefficients.
    pub ideal: Scores,
    /// Scores of the zero vector.
    pub null: Scores,
}

fn quad(v: &[f64], sigma: &[Vec<f64>]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, a)| a * sigma[i].iter().zip(v).map(|(s, b)| s * b).sum::<f64>())
        .sum()
}

fn scores(err: f64, signal: f64, noise_var: f64) -> Scores {
    Scores {
        rr: err / signal,
        rte: (err + noise_var) / noise_var,
        pve: 1.0 - (err + noise_var) / (signal + noise_var),
    }
}

/// Population scores of `beta_hat` given the true coefficients, predictor
/// covariance and noise variance.
pub fn oracle_scores(beta_hat: &[f64], beta_star: &[f64], sigma: &[Vec<f64>], noise_var: f64) -> Result<OracleScores> {
    let p = beta_star.len();
    if beta_hat.len() != p || sigma.len() != p || sigma.iter().any(|r| r.len() != p) {
        return Err(GwglError::dim("coefficients and covariance disagree in size"));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(GwglError::input(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let signal = quad(beta_star, sigma);
    if !(signal > 0.0) {
        return Err(GwglError::numerical("β*'Σβ* = 0, so the relative risk is undefined"));
    }
    let diff: Vec<f64> = beta_hat.iter().zip(beta_star).map(|(a, b)| a - b).collect();
    let own = scores(quad(&diff, sigma).max(0.0), signal, noise_var);
    Ok(OracleScores {
        rr: own.rr,
        rte: own.rte,
        pve: own.pve,
        ideal: scores(0.0, signal, noise_var),
        null: scores(signal, signal, noise_var),
    })
}

fn check_standardized_design(beta: &[f64], x: ArrayView2<f64>, structure: &GroupStructure) -> Result<()> {
    structure.require_partition()?;
    structure.validate(x.ncols())?;
    if beta.len() != x.ncols() {
        return Err(GwglError::dim(format!(
            "{} coefficients for {} columns",
            beta.len(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Within-group difference: for each group with at least two predictors,
/// the mean over pairs of `|β_i − β_j| / |x_i'x_j|`, averaged over groups.
pub fn wgd(beta: &[f64], x: ArrayView2<f64>, structure: &GroupStructure) -> Result<f64> {
    check_standardized_design(beta, x, structure)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for g in structure.groups.iter().filter(|g| g.len() >= 2) {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                let corr = x.column(i).dot(&x.column(j));
                if corr == 0.0 {
                    return Err(GwglError::numerical(format!(
                        "predictors {i} and {j} are uncorrelated, so the within-group difference divides by zero"
                    )));
                }
                sum += (beta[i] - beta[j]).abs() / corr.abs();
                pairs += 1;
            }
        }
        total += sum / pairs as f64;
        count += 1;
    }
    if count == 0 {
        return Err(GwglError::input("no group has two or more predictors"));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub i: usize,
    pub j: usize,
    /// Sample correlation `x_i'x_j`.
    pub rho: f64,
    /// Difference of the block-normalized coefficients.
    pub d: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub pairs: Vec<PairCheck>,
    /// Groups whose estimated block is zero; their pairs are not checked.
    pub skipped_groups: Vec<usize>,
    pub all_pass: bool,
}

/// Relative and absolute slack allowed for solver inexactness.
pub const GROUPING_REL_SLACK: f64 = 1e-3;
pub const GROUPING_ABS_SLACK: f64 = 1e-6;

/// Checks `|√p_a β_i/‖β^a‖ − √p_b β_j/‖β^b‖| ≤ √(2(1−ρ))/(√N ε)` for every pair
/// of predictors whose blocks are nonzero. `x` must have centered unit-norm
/// columns.
pub fn grouping_bound_check(
    fit: &FitResult,
    x: ArrayView2<f64>,
    structure: &GroupStructure,
    epsilon: f64,
) -> Result<GroupingReport> {
    check_standardized_design(&fit.beta, x, structure)?;
    if !(epsilon > 0.0) {
        return Err(GwglError::input("the grouping bound needs epsilon > 0"));
    }
    let beta = &fit.beta;
    let n = x.nrows() as f64;
    let block_norms: Vec<f64> = structure
        .groups
        .iter()
        .map(|g| g.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt())
        .collect();
    let skipped_groups: Vec<usize> = (0..structure.num_groups()).filter(|&l| block_norms[l] == 0.0).collect();
    let membership = structure.membership();
    let normalized: Vec<Option<f64>> = (0..structure.p)
        .map(|i| {
            let l = membership[i];
            (block_norms[l] > 0.0).then(|| (structure.groups[l].len() as f64).sqrt() * beta[i] / block_norms[l])
        })
        .collect();

    let mut pairs = Vec::new();
    for i in 0..structure.p {
        for j in i + 1..structure.p {
            let (Some(a), Some(b)) = (normalized[i], normalized[j]) else {
                continue;
            };
            let rho = x.column(i).dot(&x.column(j)).clamp(-1.0, 1.0);
            let bound = (2.0 * (1.0 - rho)).sqrt() / (n.sqrt() * epsilon);
            let d = (a - b).abs();
            pairs.push(PairCheck {
                i,
                j,
                rho,
                d,
                bound,
                pass: d <= bound * (1.0 + GROUPING_REL_SLACK) + GROUPING_ABS_SLACK,
            });
        }
    }
    let all_pass = pairs.iter().all(|p| p.pass);
    Ok(GroupingReport {
        pairs,
        skipped_groups,
        all_pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mpi {
    /// Largest percentage improvement over the best competitor.
    pub value: f64,
    /// Index of the sweep point where it is attained.
    pub index: usize,
    pub warnings: Vec<String>,
}

/// Maximum percentage improvement of `ours` over the best of `others` across
/// sweep points. Points where the best competitor is exactly zero are skipped.
pub fn mpi(ours: &[f64], others: &[Vec<f64>], direction: Direction) -> Result<Mpi> {
    if others.is_empty() {
        return Err(GwglError::input("MPI needs at least one competing method"));
    }
    if ours.is_empty() || others.iter().any(|o| o.len() != ours.len()) {
        return Err(GwglError::dim("all methods need the same non-empty sweep"));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut warnings = Vec::new();
    for (k, &v) in ours.iter().enumerate() {
        let column = others.iter().map(|o| o[k]);
        let competitor = match direction {
            Direction::Minimize => column.fold(f64::INFINITY, f64::min),
            Direction::Maximize => column.fold(f64::NEG_INFINITY, f64::max),
        };
        if competitor == 0.0 {
            warnings.push(format!("sweep point {k} skipped: best competitor is 0"));
            continue;
        }
        let gain = match direction {
            Direction::Minimize => 100.0 * (competitor - v) / competitor,
            Direction::Maximize => 100.0 * (v - competitor) / competitor,
        };
        if best.is_none_or(|(_, b)| gain > b) {
            best = Some((k, gain));
        }
    }
    let (index, value) = best.ok_or_else(|| GwglError::numerical("every sweep point has a zero competitor score"))?;
    Ok(Mpi { value, index, warnings })
}
