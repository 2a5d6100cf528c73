//! Losses and penalized objectives.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::linalg::{sigmoid_neg, softplus_neg};
use crate::norms::{glasso_penalty, weighted_group_l2, LatentDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Mean absolute residual.
    Lad,
    /// Mean logistic loss on ±1 labels.
    Logloss,
    /// Mean squared residual.
    L2,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Lad => "lad",
            Loss::Logloss => "logloss",
            Loss::L2 => "l2",
        }
    }

    /// Loss of a single observation given the linear predictor `x'β`.
    pub fn pointwise(self, y: f64, pred: f64) -> f64 {
        match self {
            Loss::Lad => (y - pred).abs(),
            Loss::Logloss => softplus_neg(y * pred),
            Loss::L2 => (y - pred) * (y - pred),
        }
    }

    /// Mean loss over the sample given the predictions `Xβ`.
    pub fn mean(self, y: ArrayView1<f64>, pred: ArrayView1<f64>) -> f64 {
        let n = y.len() as f64;
        y.iter().zip(pred).map(|(&yi, &pi)| self.pointwise(yi, pi)).sum::<f64>() / n
    }

    /// Gradient in β of the mean loss (smooth losses only).
    pub(crate) fn gradient(self, x: ArrayView2<f64>, y: ArrayView1<f64>, pred: ArrayView1<f64>) -> Array1<f64> {
        let n = y.len() as f64;
        let w: Array1<f64> = match self {
            Loss::Logloss => y
                .iter()
                .zip(pred)
                .map(|(&yi, &pi)| -yi * sigmoid_neg(yi * pi) / n)
                .collect(),
            Loss::L2 => y.iter().zip(pred).map(|(&yi, &pi)| -2.0 * (yi - pi) / n).collect(),
            Loss::Lad => unreachable!("LAD loss is not differentiable"),
        };
        x.t().dot(&w)
    }
}

impl std::str::FromStr for Loss {
    type Err = GwglError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lad" => Ok(Loss::Lad),
            "logloss" => Ok(Loss::Logloss),
            "l2" => Ok(Loss::L2),
            other => Err(GwglError::input(format!(
                "unknown loss '{other}' (expected lad|logloss|l2)"
            ))),
        }
    }
}

pub(crate) fn check_design(x: ArrayView2<f64>, y: ArrayView1<f64>, p: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(GwglError::dim(format!(
            "design has {} rows but response has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.ncols() != p {
        return Err(GwglError::dim(format!(
            "design has {} columns but the group structure has p={p}",
            x.ncols()
        )));
    }
    if x.nrows() == 0 {
        return Err(GwglError::input("empty sample"));
    }
    if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(GwglError::input(format!(
            "non-finite design entry at row {i}, column {j}"
        )));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GwglError::input(format!("non-finite response at row {i}")));
    }
    Ok(())
}

/// `mean loss(Xβ) + ε Σ_l √p_l ‖β^l‖_2`.
pub fn eval_objective(
    beta: &[f64],
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    penalty: f64,
    loss: Loss,
) -> Result<f64> {
    check_design(x, y, structure.p)?;
    let pen = glasso_penalty(beta, structure)?;
    let pred = x.dot(&ArrayView1::from(beta));
    Ok(loss.mean(y, pred.view()) + penalty * pen)
}

/// Latent objective `mean loss(X Σ_l v^l) + ε Σ_l d_l ‖v^l‖_2`.
pub fn eval_latent_objective(
    decomposition: &LatentDecomposition,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    penalty: f64,
    loss: Loss,
) -> Result<f64> {
    let beta = decomposition.reconstruct();
    if beta.len() != x.ncols() || x.nrows() != y.len() {
        return Err(GwglError::dim("latent decomposition does not match the design"));
    }
    let pred = x.dot(&ArrayView1::from(&beta[..]));
    Ok(loss.mean(y, pred.view()) + penalty * decomposition.penalty())
}

/// A penalized problem on a partition with explicit per-group weights. The
/// direct solvers use weights √p_l; the latent solver uses `d_l` on the
/// duplicated design.
pub(crate) struct Problem<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: ArrayView1<'a, f64>,
    pub structure: &'a GroupStructure,
    pub weights: Vec<f64>,
    pub penalty: f64,
    pub loss: Loss,
}

impl Problem<'_> {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let pred = self.x.dot(&ArrayView1::from(beta));
        self.loss.mean(self.y, pred.view()) + self.penalty * weighted_group_l2(beta, self.structure, &self.weights)
    }

    pub fn thresholds(&self, step: f64) -> Vec<f64> {
        self.weights.iter().map(|w| step * self.penalty * w).collect()
    }

    /// Largest violation of the block optimality conditions at `beta`
    /// (smooth losses): `‖∇_l‖ − εw_l` for zero blocks and
    /// `‖∇_l + εw_l β^l/‖β^l‖‖` for nonzero blocks.
    pub fn optimality_violation(&self, beta: &[f64]) -> f64 {
        let pred = self.x.dot(&ArrayView1::from(beta));
        let grad = self.loss.gradient(self.x, self.y, pred.view());
        block_violation(&grad, beta, self.structure, &self.weights, self.penalty)
    }
}

pub(crate) fn block_violation(
    grad: &Array1<f64>,
    beta: &[f64],
    structure: &GroupStructure,
    weights: &[f64],
    penalty: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for (g, w) in structure.groups.iter().zip(weights) {
        let radius = penalty * w;
        let bnorm = g.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt();
        let v = if bnorm < 1e-12 {
            let gnorm = g.iter().map(|&i| grad[i] * grad[i]).sum::<f64>().sqrt();
            (gnorm - radius).max(0.0)
        } else {
            g.iter()
                .map(|&i| {
                    let r = grad[i] + radius * beta[i] / bnorm;
                    r * r
                })
                .sum::<f64>()
                .sqrt()
        };
        worst = worst.max(v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn null_model_objectives() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let y = array![1.0, -2.0, 0.5];
        let s = GroupStructure::from_sizes(&[2]).unwrap();
        let lad = eval_objective(&[0.0, 0.0], x.view(), y.view(), &s, 1.0, Loss::Lad).unwrap();
        assert!((lad - 3.5 / 3.0).abs() < 1e-15);
        let labels = array![1.0, -1.0, 1.0];
        let lg = eval_objective(&[0.0, 0.0], x.view(), labels.view(), &s, 1.0, Loss::Logloss).unwrap();
        assert!((lg - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dimension_checks() {
        let x = array![[1.0, 2.0]];
        let s = GroupStructure::from_sizes(&[2]).unwrap();
        assert!(eval_objective(&[0.0, 0.0], x.view(), array![1.0, 2.0].view(), &s, 0.0, Loss::L2).is_err());
        assert!(eval_objective(&[0.0], x.view(), array![1.0].view(), &s, 0.0, Loss::L2).is_err());
        let bad = array![[f64::NAN, 1.0]];
        assert!(eval_objective(&[0.0, 0.0], bad.view(), array![1.0].view(), &s, 0.0, Loss::L2).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.2]];
        let y = array![1.0, -1.0, 1.0];
        let beta = [0.3, -0.2];
        for loss in [Loss::Logloss, Loss::L2] {
            let f = |b: &[f64]| loss.mean(y.view(), x.dot(&ArrayView1::from(b)).view());
            let g = loss.gradient(x.view(), y.view(), x.dot(&ArrayView1::from(&beta[..])).view());
            for k in 0..2 {
                let h = 1e-6;
                let mut bp = beta;
                let mut bm = beta;
                bp[k] += h;
                bm[k] -= h;
                let fd = (f(&bp) - f(&bm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-8, "{loss:?} {k}: {fd} vs {}", g[k]);
            }
        }
    }
}
