//! Penalty grids and validation-based selection of ε.

use ndarray::ArrayView1;
use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_dataset, Dataset};
use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::solvers::{FitConfig, FitResult, Model};

pub const DEFAULT_GRID_SIZE: usize = 50;
/// Smallest grid value as a fraction of `‖X'y‖_∞` before the outer transform.
const GRID_FLOOR: f64 = 0.005;

/// `n` values equally spaced on `[a, b]`, endpoints exact.
fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![b];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// How `λ_m` is measured. `Sum` takes `‖X'y‖_∞` as is, the scale that matches
/// a loss summed over samples. `Mean` divides it by `N`, matching the
/// sample-averaged losses the estimators in this crate minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Sum,
    #[default]
    Mean,
}

/// Candidate penalties for `model`, ascending. With `λ_m = ‖X'y‖_∞` and
/// `P = max_l p_l`, the LAD and logloss models use
/// `√(exp(lin(log(0.005λ_m), log λ_m, n)) / P)` and the squared-loss model uses
/// `exp(lin(log(0.005λ_m), log λ_m, n)) / √P`.
pub fn tuning_grid(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    model: Model,
    n: usize,
) -> Result<Vec<f64>> {
    tuning_grid_scaled(x, y, structure, model, n, GridScale::Sum)
}

/// [`tuning_grid`] with `λ_m` measured per `scale`.
pub fn tuning_grid_scaled(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    model: Model,
    n: usize,
    scale: GridScale,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(GwglError::input("grid size must be positive"));
    }
    if x.nrows() != y.len() {
        return Err(GwglError::dim(format!(
            "X has {} rows but y has {}",
            x.nrows(),
            y.len()
        )));
    }
    let mut lambda_m = x.t().dot(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == GridScale::Mean {
        lambda_m /= x.nrows() as f64;
    }
    if !(lambda_m > 0.0) || !lambda_m.is_finite() {
        return Err(GwglError::numerical("X'y = 0, so the penalty grid has no scale"));
    }
    let max_p = structure.max_size() as f64;
    let exps = lin((GRID_FLOOR * lambda_m).ln(), lambda_m.ln(), n);
    Ok(exps
        .into_iter()
        .map(|e| match model {
            Model::GwglLr | Model::GwglLg => (e.exp() / max_p).sqrt(),
            Model::GlassoL2 => e.exp() / max_p.sqrt(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub grid_size: usize,
    /// Share of the training rows held out for validation.
    pub validation_fraction: f64,
    pub split_seed: u64,
    #[serde(default)]
    pub grid_scale: GridScale,
    pub fit: FitConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            grid_size: DEFAULT_GRID_SIZE,
            validation_fraction: 0.3,
            split_seed: 0,
            grid_scale: GridScale::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub model: Model,
    pub grid: Vec<f64>,
    /// Unpenalized validation loss per grid value; `None` where the fit failed.
    pub validation_loss: Vec<Option<f64>>,
    pub chosen_index: usize,
    pub chosen_epsilon: f64,
    /// Fit with the chosen ε on all training rows.
    pub refit: FitResult,
    pub warnings: Vec<String>,
}

impl TuningReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tuning report serializes")
    }

    /// One row per grid value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,validation_loss,chosen\n");
        for (k, (e, l)) in self.grid.iter().zip(&self.validation_loss).enumerate() {
            let loss = l.map_or_else(|| "NaN".to_string(), |v| v.to_string());
            out.push_str(&format!("{e},{loss},{}\n", u8::from(k == self.chosen_index)));
        }
        out
    }
}

/// Index of the smallest present value; the first one on ties.
fn first_minimum(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

/// Splits `train` into fitting and validation rows, fits every grid value on
/// the fitting rows, and keeps the ε with the smallest unpenalized validation
/// loss (the smallest ε on ties). The grid is computed from all of `train`.
pub fn tune_epsilon(
    train: &Dataset,
    structure: &GroupStructure,
    model: Model,
    config: &TuneConfig,
) -> Result<TuningReport> {
    let f = config.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(GwglError::input(format!(
            "validation fraction must lie in (0, 1), got {f}"
        )));
    }
    let grid = tuning_grid_scaled(
        train.x.view(),
        train.y.view(),
        structure,
        model,
        config.grid_size,
        config.grid_scale,
    )?;
    let [fit_part, validation, _] = split_dataset(train, [1.0 - f, f, 0.0], config.split_seed)?;
    if validation.n() == 0 {
        return Err(GwglError::input(format!(
            "{} training rows leave no validation rows at fraction {f}",
            train.n()
        )));
    }
    let loss = model.loss();
    let outcomes: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&eps| {
            let fit = model.fit(
                fit_part.x.view(),
                fit_part.y.view(),
                structure,
                &FitConfig {
                    epsilon: eps,
                    ..config.fit.clone()
                },
            )?;
            let pred = validation.x.dot(&ArrayView1::from(&fit.beta));
            Ok(loss.mean(validation.y.view(), pred.view()))
        })
        .collect();

    let mut warnings = Vec::new();
    let mut validation_loss = Vec::with_capacity(grid.len());
    for (eps, out) in grid.iter().zip(outcomes) {
        match out {
            Ok(v) => validation_loss.push(Some(v)),
            Err(e) => {
                warnings.push(format!("epsilon {eps} excluded: {e}"));
                validation_loss.push(None);
            }
        }
    }
    let chosen_index = first_minimum(&validation_loss)
        .ok_or_else(|| GwglError::numerical(format!("every grid value failed to fit: {}", warnings.join("; "))))?;
    let chosen_epsilon = grid[chosen_index];
    let refit = model.fit(
        train.x.view(),
        train.y.view(),
        structure,
        &FitConfig {
            epsilon: chosen_epsilon,
            ..config.fit.clone()
        },
    )?;
    Ok(TuningReport {
        model,
        grid,
        validation_loss,
        chosen_index,
        chosen_epsilon,
        refit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, standardize, SyntheticSpec};
    use ndarray::array;

    #[test]
    fn grid_endpoints() {
        // X'y = (4, −1)
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let y = array![4.0, -1.0];
        let s = GroupStructure::singletons(2);
        let g = tuning_grid(x.view(), y.view(), &s, Model::GwglLr, DEFAULT_GRID_SIZE).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.02f64.sqrt()).abs() < 1e-12);
        assert!((g[49] - 2.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        // log-spaced before the square root: constant ratio of squares
        let r0 = (g[1] / g[0]).powi(2);
        assert!(g.windows(2).all(|w| ((w[1] / w[0]).powi(2) - r0).abs() < 1e-12));

        let l2 = tuning_grid(
            x.view(),
            y.view(),
            &GroupStructure::from_sizes(&[2]).unwrap(),
            Model::GlassoL2,
            5,
        )
        .unwrap();
        assert!((l2[0] - 0.02 / 2f64.sqrt()).abs() < 1e-12);
        assert!((l2[4] - 4.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(tuning_grid(x.view(), array![0.0, 0.0].view(), &s, Model::GwglLr, 5).is_err());
    }

    #[test]
    fn ties_pick_smallest_epsilon() {
        assert_eq!(first_minimum(&[Some(1.0), Some(1.0), Some(1.0)]), Some(0));
        assert_eq!(first_minimum(&[None, Some(2.0), Some(1.0), Some(1.0)]), Some(2));
        assert_eq!(first_minimum(&[None, None]), None);
    }

    #[test]
    fn tuning_is_grid_optimal_and_deterministic() {
        let spec = SyntheticSpec {
            group_sizes: vec![1, 3],
            rho_w: 0.5,
            snr: Some(2.0),
            noise_var: None,
            outlier_prob: 0.1,
            n: 40,
            seed: 3,
            rho_jitter: None,
        };
        let ds = standardize(&generate_synthetic(&spec).unwrap()).unwrap();
        let s = spec.structure().unwrap();
        let cfg = TuneConfig {
            grid_size: 8,
            ..Default::default()
        };
        for model in [Model::GwglLr, Model::GlassoL2] {
            let report = tune_epsilon(&ds, &s, model, &cfg).unwrap();
            let best = report.validation_loss[report.chosen_index].unwrap();
            assert!(report.validation_loss.iter().all(|v| v.unwrap() >= best));
            assert_eq!(report.chosen_epsilon, report.grid[report.chosen_index]);
            assert_eq!(report.refit.epsilon, report.chosen_epsilon);
            assert_eq!(tune_epsilon(&ds, &s, model, &cfg).unwrap(), report);
            assert_eq!(report.to_csv().lines().count(), 9);
        }
    }
}
