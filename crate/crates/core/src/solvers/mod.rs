//! Estimators: GWGL-LR (LAD loss), GWGL-LG (logloss), the ℓ2-loss GLASSO
//! baseline, and the latent overlapping-group variant.
//!
//! All fits start from β = 0 and are deterministic. The LAD problem is
//! solved by a primal-dual hybrid gradient method; the smooth losses use
//! accelerated proximal gradient with function-value restart.

mod apg;
mod latent;
pub mod objective;
mod pdhg;
pub mod prox;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::norms::LatentDecomposition;

pub use latent::fit_latent_overlap;
pub use objective::{eval_latent_objective, eval_objective, Loss};
pub use prox::prox_group_l2;

use objective::{check_design, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Penalty magnitude ε (the Wasserstein ball radius).
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative objective change over a 10-iteration window.
    pub tol: f64,
    /// Threshold on the optimality certificate: block subgradient residual
    /// for smooth losses, relative duality gap for LAD.
    pub certificate_tol: f64,
    /// Primal step for PDHG / proximal step for APG; chosen from ‖X‖ when unset.
    pub primal_step: Option<f64>,
    /// Dual step for PDHG; chosen from ‖X‖ when unset.
    pub dual_step: Option<f64>,
    /// Reserved for randomized initializations; the solvers start at β = 0.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 0.0,
            max_iters: 100_000,
            tol: 1e-8,
            certificate_tol: 1e-6,
            primal_step: None,
            dual_step: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        FitConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(GwglError::input(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.tol > 0.0) || !(self.certificate_tol > 0.0) {
            return Err(GwglError::input("tolerances must be positive"));
        }
        if self.max_iters == 0 {
            return Err(GwglError::input("max_iters must be at least 1"));
        }
        for s in [self.primal_step, self.dual_step].into_iter().flatten() {
            if !(s > 0.0) {
                return Err(GwglError::input("step sizes must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: f64,
    pub loss: Loss,
    /// Final optimality certificate (see [`FitConfig::certificate_tol`]);
    /// absent when the problem admits none (LAD with ε = 0).
    #[serde(default)]
    pub certificate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentDecomposition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Objective per iteration; not serialized.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }
}

/// The estimators exposed by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    GwglLr,
    GwglLg,
    GlassoL2,
}

impl Model {
    pub fn loss(self) -> Loss {
        match self {
            Model::GwglLr => Loss::Lad,
            Model::GwglLg => Loss::Logloss,
            Model::GlassoL2 => Loss::L2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::GwglLr => "gwgl-lr",
            Model::GwglLg => "gwgl-lg",
            Model::GlassoL2 => "glasso-l2",
        }
    }

    pub fn fit(
        self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        structure: &GroupStructure,
        config: &FitConfig,
    ) -> Result<FitResult> {
        match self {
            Model::GwglLr => fit_gwgl_lr(x, y, structure, config),
            Model::GwglLg => fit_gwgl_lg(x, y, structure, config),
            Model::GlassoL2 => fit_glasso_l2(x, y, structure, config.epsilon, config),
        }
    }
}

fn direct_problem<'a>(
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    structure: &'a GroupStructure,
    penalty: f64,
    loss: Loss,
    config: &FitConfig,
) -> Result<Problem<'a>> {
    config.validate()?;
    structure.require_partition()?;
    structure.validate(x.ncols())?;
    check_design(x, y, structure.p)?;
    Ok(Problem {
        x,
        y,
        structure,
        weights: structure.sqrt_sizes(),
        penalty,
        loss,
    })
}

pub(crate) fn check_labels(y: ArrayView1<f64>) -> Result<()> {
    if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
        return Err(GwglError::input(format!(
            "label {} at row {i} is outside {{-1, +1}}",
            y[i]
        )));
    }
    Ok(())
}

/// GWGL-LR: `min (1/N)Σ|y_i − x_i'β| + ε Σ_l √p_l ‖β^l‖_2`.
pub fn fit_gwgl_lr(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    config: &FitConfig,
) -> Result<FitResult> {
    let prob = direct_problem(x, y, structure, config.epsilon, Loss::Lad, config)?;
    Ok(pdhg::solve(&prob, config))
}

/// GWGL-LG: `min (1/N)Σ log(1 + exp(−y_i β'x_i)) + ε Σ_l √p_l ‖β^l‖_2`.
pub fn fit_gwgl_lg(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    config: &FitConfig,
) -> Result<FitResult> {
    let prob = direct_problem(x, y, structure, config.epsilon, Loss::Logloss, config)?;
    check_labels(y)?;
    Ok(apg::solve(&prob, config))
}

/// ℓ2-loss GLASSO: `min (1/N)‖y − Xβ‖² + λ Σ_l √p_l ‖β^l‖_2`. `lambda`
/// takes the place of `config.epsilon`.
pub fn fit_glasso_l2(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    lambda: f64,
    config: &FitConfig,
) -> Result<FitResult> {
    let config = FitConfig {
        epsilon: lambda,
        ..config.clone()
    };
    let prob = direct_problem(x, y, structure, lambda, Loss::L2, &config)?;
    Ok(apg::solve(&prob, &config))
}

/// Largest block optimality violation of `beta` for a smooth loss on a partition.
pub fn optimality_violation(
    beta: &[f64],
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    penalty: f64,
    loss: Loss,
) -> Result<f64> {
    if loss == Loss::Lad {
        return Err(GwglError::input("block gradient certificate requires a smooth loss"));
    }
    let prob = direct_problem(x, y, structure, penalty, loss, &FitConfig::default())?;
    if beta.len() != structure.p {
        return Err(GwglError::dim("coefficient length does not match the structure"));
    }
    Ok(prob.optimality_violation(beta))
}

/// Shared bookkeeping for the iterative solvers.
pub(crate) struct Monitor {
    pub trace: Vec<f64>,
    tol: f64,
}

impl Monitor {
    pub fn new(tol: f64, capacity: usize) -> Self {
        Monitor {
            trace: Vec::with_capacity(capacity.min(1 << 16)),
            tol,
        }
    }

    /// True once the relative objective change over the last 10 iterations is below tol.
    pub fn window_settled(&self) -> bool {
        let n = self.trace.len();
        if n < 11 {
            return false;
        }
        let (old, new) = (self.trace[n - 11], self.trace[n - 1]);
        (old - new).abs() <= self.tol * new.abs().max(1.0)
    }
}
