//! Synthetic-data sweeps comparing GWGL-LR with the ℓ2-loss GLASSO across
//! SNR or within-group correlation.
//!
//! Each sweep point draws several datasets (dataset d uses the same seed at
//! every point, so only the swept parameter changes), splits each into training and
//! test rows, groups the predictors, tunes ε per method on the training rows
//! and scores the refit on the test rows.

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_predictors, ClusteringConfig};
use crate::data::{generate_synthetic, standardize, SyntheticSpec};
use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;
use crate::linalg::median;
use crate::metrics::{mad, mpi, oracle_scores, Direction, Mpi};
use crate::solvers::{FitConfig, Model};
use crate::tuning::{tune_epsilon, GridScale, TuneConfig, DEFAULT_GRID_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Snr,
    Rho,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Rho => "rho",
        }
    }
}

/// `n` values log-spaced on `[a, b]`.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub datasets: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub group_sizes: Vec<usize>,
    pub outlier_prob: f64,
    /// Within-group correlation on the SNR axis.
    pub rho_w: f64,
    pub rho_jitter: Option<[f64; 2]>,
    /// SNR on the correlation axis.
    pub snr: f64,
    /// Cluster count for spectral grouping; `None` selects it by eigengap.
    pub clusters: Option<usize>,
    /// Use the generating groups instead of clustering.
    pub true_groups: bool,
    pub standardize: bool,
    pub grid_size: usize,
    pub grid_scale: GridScale,
    pub seed: u64,
}

impl SweepConfig {
    /// The SNR experiment: 8 log-spaced SNR values in [0.5, 2], correlation
    /// 0.8 times a uniform draw on [0.2, 0.4].
    pub fn snr_default() -> Self {
        SweepConfig {
            axis: SweepAxis::Snr,
            values: log_space(0.5, 2.0, 8),
            datasets: 10,
            n_train: 100,
            n_test: 60,
            group_sizes: vec![1, 3, 5, 7],
            outlier_prob: 0.3,
            rho_w: 0.8,
            rho_jitter: Some([0.2, 0.4]),
            snr: 1.0,
            clusters: Some(4),
            true_groups: false,
            standardize: true,
            grid_size: DEFAULT_GRID_SIZE,
            grid_scale: GridScale::Mean,
            seed: 0,
        }
    }

    /// The correlation experiment: ρ_w in 0.1..0.9 at SNR 1.
    pub fn rho_default() -> Self {
        SweepConfig {
            axis: SweepAxis::Rho,
            values: (1..=9).map(|k| k as f64 / 10.0).collect(),
            rho_jitter: None,
            ..Self::snr_default()
        }
    }

    fn spec(&self, point: usize, dataset: usize) -> SyntheticSpec {
        let value = self.values[point];
        let (rho_w, snr, rho_jitter) = match self.axis {
            SweepAxis::Snr => (self.rho_w, value, self.rho_jitter),
            SweepAxis::Rho => (value, self.snr, None),
        };
        SyntheticSpec {
            group_sizes: self.group_sizes.clone(),
            rho_w,
            snr: Some(snr),
            noise_var: None,
            outlier_prob: self.outlier_prob,
            n: self.n_train + self.n_test,
            // dataset d reuses its draws at every sweep point
            seed: self.seed.wrapping_mul(1_000_003).wrapping_add(1000 + dataset as u64),
            rho_jitter,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.datasets == 0 {
            return Err(GwglError::input("a sweep needs at least one point and one dataset"));
        }
        if self.n_train < 2 || self.n_test == 0 {
            return Err(GwglError::input("a sweep needs at least 2 training and 1 test rows"));
        }
        Ok(())
    }
}

pub const SWEEP_METHODS: [Model; 2] = [Model::GwglLr, Model::GlassoL2];

/// Scores of one method on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub point: usize,
    pub value: f64,
    pub dataset: usize,
    /// Method name, or `ideal` (true coefficients) / `null` (zero vector).
    pub method: String,
    pub mad: f64,
    pub rr: f64,
    pub rte: f64,
    pub pve: f64,
    pub epsilon: Option<f64>,
    pub active_groups: Option<usize>,
}

/// Medians over datasets for one method at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub value: f64,
    pub method: String,
    pub mad: f64,
    pub rr: f64,
    pub rte: f64,
    pub pve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub summary: Vec<SweepSummary>,
    /// MPI of GWGL-LR over the other fitted methods, per metric.
    pub mpi: Vec<(String, Mpi)>,
    #[serde(skip)]
    pub records: Vec<SweepRecord>,
}

fn run_one(cfg: &SweepConfig, point: usize, dataset: usize) -> Result<Vec<SweepRecord>> {
    let spec = cfg.spec(point, dataset);
    let full = generate_synthetic(&spec)?;
    let truth = full.truth.clone().expect("synthetic data carry their truth");
    let train_idx: Vec<usize> = (0..cfg.n_train).collect();
    let test_idx: Vec<usize> = (cfg.n_train..cfg.n_train + cfg.n_test).collect();
    let raw_train = full.subset(&train_idx);
    let test = full.subset(&test_idx);
    let std_train = standardize(&raw_train)?;
    let record = std_train.standardization.clone().expect("standardized");
    let (train, test_x) = if cfg.standardize {
        let tx = record.apply(test.x.view())?;
        (std_train.clone(), tx)
    } else {
        (raw_train.clone(), test.x.clone())
    };

    let structure = if cfg.true_groups {
        spec.structure()?
    } else {
        cluster_predictors(
            std_train.x.view(),
            &ClusteringConfig {
                n_clusters: cfg.clusters,
                seed: dataset as u64,
                ..Default::default()
            },
        )?
    };

    let value = cfg.values[point];
    let test_y = test.y.as_slice().expect("contiguous");
    let mut out = Vec::new();
    let mut reference = |method: &str, beta_raw: &[f64]| -> Result<()> {
        let pred = test.x.dot(&ArrayView1::from(beta_raw));
        let s = oracle_scores(beta_raw, &truth.beta, &truth.sigma, truth.noise_var)?;
        out.push(SweepRecord {
            point,
            value,
            dataset,
            method: method.into(),
            mad: mad(test_y, pred.as_slice().expect("contiguous"))?,
            rr: s.rr,
            rte: s.rte,
            pve: s.pve,
            epsilon: None,
            active_groups: None,
        });
        Ok(())
    };
    reference("ideal", &truth.beta)?;
    reference("null", &vec![0.0; truth.beta.len()])?;

    for model in SWEEP_METHODS {
        let tune = TuneConfig {
            grid_size: cfg.grid_size,
            grid_scale: cfg.grid_scale,
            split_seed: dataset as u64,
            fit: FitConfig::default(),
            ..Default::default()
        };
        let report = tune_epsilon(&train, &structure, model, &tune)?;
        let beta = &report.refit.beta;
        let pred = test_x.dot(&ArrayView1::from(beta));
        // population scores need coefficients on the generating scale
        let beta_raw = if cfg.standardize {
            record.coef_to_original(beta).0
        } else {
            beta.clone()
        };
        let s = oracle_scores(&beta_raw, &truth.beta, &truth.sigma, truth.noise_var)?;
        let active = structure
            .groups
            .iter()
            .filter(|g| g.iter().any(|&i| beta[i] != 0.0))
            .count();
        out.push(SweepRecord {
            point,
            value,
            dataset,
            method: model.name().into(),
            mad: mad(test_y, pred.as_slice().expect("contiguous"))?,
            rr: s.rr,
            rte: s.rte,
            pve: s.pve,
            epsilon: Some(report.chosen_epsilon),
            active_groups: Some(active),
        });
    }
    Ok(out)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.values.len())
        .flat_map(|p| (0..cfg.datasets).map(move |d| (p, d)))
        .collect();
    let results: Vec<Result<Vec<SweepRecord>>> = jobs.par_iter().map(|&(p, d)| run_one(cfg, p, d)).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }

    let methods: Vec<String> = SWEEP_METHODS
        .iter()
        .map(|m| m.name().to_string())
        .chain(["ideal".to_string(), "null".to_string()])
        .collect();
    let mut summary = Vec::new();
    for (point, &value) in cfg.values.iter().enumerate() {
        for method in &methods {
            let rows: Vec<&SweepRecord> = records
                .iter()
                .filter(|r| r.point == point && &r.method == method)
                .collect();
            let med = |f: fn(&SweepRecord) -> f64| median(&mut rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            summary.push(SweepSummary {
                value,
                method: method.clone(),
                mad: med(|r| r.mad),
                rr: med(|r| r.rr),
                rte: med(|r| r.rte),
                pve: med(|r| r.pve),
            });
        }
    }

    let series = |method: &str, f: fn(&SweepSummary) -> f64| -> Vec<f64> {
        summary.iter().filter(|s| s.method == method).map(f).collect()
    };
    let ours = SWEEP_METHODS[0].name();
    type Column = fn(&SweepSummary) -> f64;
    let metrics: [(&str, Column, Direction); 4] = [
        ("mad", |s| s.mad, Direction::Minimize),
        ("rr", |s| s.rr, Direction::Minimize),
        ("rte", |s| s.rte, Direction::Minimize),
        ("pve", |s| s.pve, Direction::Maximize),
    ];
    let mut mpis = Vec::new();
    for (name, f, dir) in metrics {
        let others: Vec<Vec<f64>> = SWEEP_METHODS[1..].iter().map(|m| series(m.name(), f)).collect();
        if let Ok(m) = mpi(&series(ours, f), &others, dir) {
            mpis.push((name.to_string(), m));
        }
    }
    Ok(SweepReport {
        config: cfg.clone(),
        summary,
        mpi: mpis,
        records,
    })
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

impl SweepReport {
    /// One row per method and sweep point, medians over datasets, including
    /// the `ideal` and `null` reference rows.
    pub fn summary_csv(&self) -> String {
        let mut out = format!("{},method,mad,rr,rte,pve\n", self.config.axis.name());
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.value, s.method, s.mad, s.rr, s.rte, s.pve
            ));
        }
        out
    }

    /// One row per method, sweep point and dataset.
    pub fn records_csv(&self) -> String {
        let mut out = format!(
            "{},dataset,method,mad,rr,rte,pve,epsilon,active_groups\n",
            self.config.axis.name()
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.value,
                r.dataset,
                r.method,
                r.mad,
                r.rr,
                r.rte,
                r.pve,
                fmt_opt(&r.epsilon),
                fmt_opt(&r.active_groups)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    /// Median metric of `method` across sweep points, in sweep order.
    pub fn series(&self, method: &str, metric: fn(&SweepSummary) -> f64) -> Vec<f64> {
        self.summary.iter().filter(|s| s.method == method).map(metric).collect()
    }
}

/// The partition used by a sweep when groups come from the generator.
pub fn generating_groups(cfg: &SweepConfig) -> Result<GroupStructure> {
    GroupStructure::from_sizes(&cfg.group_sizes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_space_endpoints() {
        let v = log_space(0.5, 2.0, 8);
        assert_eq!(v.len(), 8);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[7] - 2.0).abs() < 1e-12);
        assert!((v[1] / v[0] - v[7] / v[6]).abs() < 1e-12);
    }

    #[test]
    fn tiny_sweep_is_deterministic() {
        let cfg = SweepConfig {
            values: vec![1.0, 2.0],
            datasets: 2,
            n_train: 30,
            n_test: 10,
            grid_size: 4,
            ..SweepConfig::snr_default()
        };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.summary_csv(), b.summary_csv());
        assert_eq!(a.records_csv(), b.records_csv());
        // 2 points × 4 methods (2 fitted + ideal + null)
        assert_eq!(a.summary.len(), 8);
        let ideal = a.series("ideal", |s| s.rr);
        assert!(ideal.iter().all(|&v| v == 0.0));
        let null = a.series("null", |s| s.pve);
        assert!(null.iter().all(|&v| v == 0.0));
    }
}
