//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and input/output errors, 3 for
//! numerical failures (non-convergence, infeasible programs, failed checks).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_predictors_with_diagnostics, ClusteringConfig, ClusteringDiagnostics};
use crate::data::{
    generate_synthetic, load_dataset, meta_path, save_dataset, standardize, write_atomic, Dataset, DatasetMeta,
    ResponseKind, Standardization, SyntheticSpec,
};
use crate::error::{GwglError, Result};
use crate::experiment::{log_space, run_sweep, SweepAxis, SweepConfig};
use crate::groups::GroupStructure;
use crate::metrics::{mad, oracle_scores, OracleScores};
use crate::oracle;
use crate::solvers::{eval_latent_objective, eval_objective, fit_latent_overlap, FitConfig, FitResult, Loss, Model};
use crate::tuning::{tune_epsilon, GridScale, TuneConfig, TuningReport, DEFAULT_GRID_SIZE};

#[derive(Parser, Debug)]
#[command(
    name = "gwgl",
    version,
    about = "Robust grouped variable selection with Wasserstein grouped LASSO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset (CSV plus a `.meta.json` sidecar).
    Generate(GenerateArgs),
    /// Group predictors by spectral clustering.
    Cluster(ClusterArgs),
    /// Fit one model at a fixed or tuned ε.
    Fit(FitArgs),
    /// Validation-tune ε over the penalty grid.
    Tune(TuneArgs),
    /// Score a fitted model on a dataset.
    Evaluate(EvaluateArgs),
    /// Numerical checks of the theory.
    OracleCheck {
        #[command(subcommand)]
        check: OracleCommand,
    },
    /// SNR or correlation experiment over synthetic datasets.
    Sweep(SweepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    GwglLr,
    GwglLg,
    GlassoL2,
    LatentOverlap,
}

impl ModelKind {
    fn direct(self) -> Option<Model> {
        match self {
            ModelKind::GwglLr => Some(Model::GwglLr),
            ModelKind::GwglLg => Some(Model::GwglLg),
            ModelKind::GlassoL2 => Some(Model::GlassoL2),
            ModelKind::LatentOverlap => None,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum LossArg {
    Lad,
    Logloss,
    L2,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Loss {
        match l {
            LossArg::Lad => Loss::Lad,
            LossArg::Logloss => Loss::Logloss,
            LossArg::L2 => Loss::L2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ScaleArg {
    Sum,
    Mean,
}

impl From<ScaleArg> for GridScale {
    fn from(s: ScaleArg) -> GridScale {
        match s {
            ScaleArg::Sum => GridScale::Sum,
            ScaleArg::Mean => GridScale::Mean,
        }
    }
}

/// `N` or `auto`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Clusters(Option<usize>);

impl std::str::FromStr for Clusters {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Clusters(None));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or 'auto', got '{s}'")),
            Ok(n) => Ok(Clusters(Some(n))),
        }
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Group sizes, comma separated.
    #[arg(long, default_value = "1,3,5,7", value_delimiter = ',')]
    group_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.8)]
    rho_w: f64,
    /// Multiply ρ_w by a uniform draw on `a,b`.
    #[arg(long, value_delimiter = ',')]
    rho_jitter: Option<Vec<f64>>,
    /// Signal-to-noise ratio; sets the noise variance.
    #[arg(long, conflicts_with = "noise_var")]
    snr: Option<f64>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    outlier_prob: f64,
    #[arg(short, long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace the response by its sign.
    #[arg(long)]
    binary: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    /// Use the predictors as given instead of centering and scaling them.
    #[arg(long)]
    no_standardize: bool,
}

#[derive(Args, Debug)]
struct ClusterOpts {
    /// Number of groups, or `auto` for the eigengap rule.
    #[arg(long, default_value = "auto")]
    clusters: Clusters,
    /// Neighbors in the similarity graph; smallest connected value by default.
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct GroupArgs {
    /// Group structure JSON.
    #[arg(long, conflicts_with = "auto_cluster")]
    groups: Option<PathBuf>,
    /// Group predictors by spectral clustering.
    #[arg(long)]
    auto_cluster: bool,
    #[command(flatten)]
    cluster: ClusterOpts,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    cluster: ClusterOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Group structure JSON.
    #[arg(short, long)]
    out: PathBuf,
    /// Diagnostics JSON; defaults to `<out>.diagnostics.json`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "gwgl-lr")]
    model: ModelKind,
    /// Loss of the latent-overlap model.
    #[arg(long, value_enum, default_value = "lad")]
    loss: LossArg,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, value_enum, default_value = "mean")]
    grid_scale: ScaleArg,
    #[arg(long, default_value_t = 0.3)]
    validation_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    groups: GroupArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, required_unless_present = "tune", conflicts_with = "tune")]
    epsilon: Option<f64>,
    /// Choose ε on a validation split.
    #[arg(long)]
    tune: bool,
    /// Model JSON.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    groups: GroupArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Tuning report JSON.
    #[arg(short, long)]
    out: PathBuf,
    /// Grid table CSV.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Response column; defaults to the one the model was fit on.
    #[arg(long)]
    response: Option<String>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// W1 mixture ratio against (1 − q)/q.
    Mixture {
        #[arg(long, default_value_t = 0.2)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        max_support: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Exact DRO worst case against its dual-norm relaxation.
    DroBound {
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Closed-form dual group norm against an explicit maximizer.
    DualNorm {
        #[arg(long, default_value_t = 1000)]
        vectors: usize,
        #[arg(long, default_value_t = 12)]
        max_dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Grouping-effect bound on fitted synthetic data.
    Grouping {
        /// Fits per model.
        #[arg(long, default_value_t = 10)]
        fits: usize,
        #[arg(short, long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "snr")]
    axis: AxisArg,
    /// Sweep values, comma separated; the axis default when omitted.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Number of log-spaced SNR values in [0.5, 2] when `--values` is omitted.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 10)]
    datasets: usize,
    #[arg(long, default_value_t = 100)]
    n_train: usize,
    #[arg(long, default_value_t = 60)]
    n_test: usize,
    #[arg(long, default_value = "1,3,5,7", value_delimiter = ',')]
    group_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    outlier_prob: f64,
    #[arg(long, default_value = "4")]
    clusters: Clusters,
    /// Use the generating groups instead of clustering.
    #[arg(long)]
    true_groups: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, value_enum, default_value = "mean")]
    grid_scale: ScaleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `summary.csv`, `records.csv` and `report.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum AxisArg {
    Snr,
    Rho,
}

/// Everything `evaluate` needs to rebuild the training objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelReport {
    model: ModelKind,
    loss: Loss,
    response: String,
    features: Vec<String>,
    standardization: Option<Standardization>,
    groups: GroupStructure,
    group_source: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    clustering: Option<ClusteringDiagnostics>,
    epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tuning: Option<TuningSummary>,
    /// Coefficients on the scale of the input columns, with the intercept
    /// implied by centering.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    original_scale: Option<OriginalScale>,
    fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TuningSummary {
    grid: Vec<f64>,
    validation_loss: Vec<Option<f64>>,
    chosen_index: usize,
    grid_scale: GridScale,
    validation_fraction: f64,
    warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OriginalScale {
    beta: Vec<f64>,
    intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvaluationReport {
    model: ModelKind,
    n: usize,
    epsilon: f64,
    /// Penalized objective of the stored coefficients on this data.
    objective: f64,
    /// Unpenalized mean loss.
    mean_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
    /// Population scores when the data carry their generating model.
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GenerateReport {
    data: String,
    meta: String,
    n: usize,
    p: usize,
    seed: u64,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Output paths must sit in an existing directory; checked before any work.
fn check_output(path: &Path) -> Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(GwglError::input(format!(
            "--out {}: directory {} does not exist",
            display(path),
            display(parent)
        )));
    }
    Ok(())
}

fn check_input(path: &Path, flag: &str) -> Result<()> {
    if !path.is_file() {
        return Err(GwglError::input(format!("{flag} {}: file not found", display(path))));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn kind_for(model: ModelKind, loss: LossArg) -> ResponseKind {
    match (model, loss) {
        (ModelKind::GwglLg, _) | (ModelKind::LatentOverlap, LossArg::Logloss) => ResponseKind::Binary,
        _ => ResponseKind::Continuous,
    }
}

fn load(args: &DataArgs, kind: ResponseKind) -> Result<Dataset> {
    let raw = load_dataset(&args.data, &args.response, kind)?;
    if args.no_standardize {
        Ok(raw)
    } else {
        standardize(&raw)
    }
}

fn resolve_groups(
    args: &GroupArgs,
    ds: &Dataset,
    seed: u64,
) -> Result<(GroupStructure, String, Option<ClusteringDiagnostics>)> {
    if let Some(path) = &args.groups {
        let s = GroupStructure::load(path)?;
        s.validate(ds.p())?;
        return Ok((s, display(path), None));
    }
    if !args.auto_cluster {
        return Err(GwglError::input(
            "groups are required: pass --groups FILE or --auto-cluster",
        ));
    }
    let (s, diag) = cluster_predictors_with_diagnostics(ds.x.view(), &cluster_config(&args.cluster, seed))?;
    Ok((s, "spectral".into(), Some(diag)))
}

fn cluster_config(opts: &ClusterOpts, seed: u64) -> ClusteringConfig {
    ClusteringConfig {
        k_neighbors: opts.knn,
        n_clusters: opts.clusters.0,
        sigma: opts.sigma,
        seed,
        ..Default::default()
    }
}

fn fit_config(args: &SolverArgs, epsilon: f64) -> FitConfig {
    let mut cfg = FitConfig::with_epsilon(epsilon);
    if let Some(m) = args.max_iters {
        cfg.max_iters = m;
    }
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    cfg.seed = args.seed;
    cfg
}

fn tune_config(args: &SolverArgs) -> TuneConfig {
    TuneConfig {
        grid_size: args.grid_size,
        validation_fraction: args.validation_fraction,
        split_seed: args.seed,
        grid_scale: args.grid_scale.into(),
        fit: fit_config(args, 0.0),
    }
}

fn log_fit(fit: &FitResult) {
    eprintln!(
        "fit: {} iterations, {}",
        fit.iterations,
        if fit.converged { "converged" } else { "not converged" }
    );
}

fn not_converged(fit: &FitResult) -> Result<()> {
    if fit.converged {
        Ok(())
    } else {
        Err(GwglError::numerical(format!(
            "solver stopped after {} iterations without meeting the tolerances",
            fit.iterations
        )))
    }
}

fn tune_direct(args: &SolverArgs, ds: &Dataset, s: &GroupStructure) -> Result<(Model, TuningReport)> {
    let model = args
        .model
        .direct()
        .ok_or_else(|| GwglError::input("--tune is not available for --model latent-overlap; pass --epsilon"))?;
    Ok((model, tune_epsilon(ds, s, model, &tune_config(args))?))
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    check_output(&a.out)?;
    let jitter = match a.rho_jitter.as_deref() {
        None => None,
        Some([lo, hi]) => Some([*lo, *hi]),
        Some(_) => return Err(GwglError::input("--rho-jitter takes exactly two values a,b")),
    };
    let spec = SyntheticSpec {
        group_sizes: a.group_sizes,
        rho_w: a.rho_w,
        snr: a.snr.or(if a.noise_var.is_none() { Some(1.0) } else { None }),
        noise_var: a.noise_var,
        outlier_prob: a.outlier_prob,
        n: a.n,
        seed: a.seed,
        rho_jitter: jitter,
    };
    let mut ds = generate_synthetic(&spec)?;
    if a.binary {
        ds = ds.binarize();
    }
    let meta = meta_path(&a.out);
    save_dataset(&ds, &a.out)?;
    write_text(&meta, &to_json(&DatasetMeta::describe(&ds, Some(&spec))))?;
    eprint!(
        "{}",
        to_json(&GenerateReport {
            data: display(&a.out),
            meta: display(&meta),
            n: ds.n(),
            p: ds.p(),
            seed: a.seed,
        })
    );
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<()> {
    check_input(&a.data.data, "--data")?;
    check_output(&a.out)?;
    let diag_path = a
        .diagnostics
        .clone()
        .unwrap_or_else(|| a.out.with_extension("diagnostics.json"));
    check_output(&diag_path)?;
    let ds = load(&a.data, ResponseKind::Continuous)?;
    let (s, diag) = cluster_predictors_with_diagnostics(ds.x.view(), &cluster_config(&a.cluster, a.seed))?;
    write_text(&a.out, &to_json(&s))?;
    write_text(&diag_path, &to_json(&diag))?;
    Ok(())
}

fn build_model_report(
    kind: ModelKind,
    ds: &Dataset,
    groups: (GroupStructure, String, Option<ClusteringDiagnostics>),
    fit: FitResult,
    tuning: Option<TuningSummary>,
) -> ModelReport {
    let original_scale = ds.standardization.as_ref().map(|st| {
        let (beta, intercept) = st.coef_to_original(&fit.beta);
        OriginalScale { beta, intercept }
    });
    ModelReport {
        model: kind,
        loss: fit.loss,
        response: ds.response_name.clone(),
        features: ds.feature_names.clone(),
        standardization: ds.standardization.clone(),
        groups: groups.0,
        group_source: groups.1,
        clustering: groups.2,
        epsilon: fit.epsilon,
        tuning,
        original_scale,
        fit,
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    check_input(&a.data.data, "--data")?;
    if let Some(g) = &a.groups.groups {
        check_input(g, "--groups")?;
    } else if !a.groups.auto_cluster {
        return Err(GwglError::input(
            "groups are required: pass --groups FILE or --auto-cluster",
        ));
    }
    check_output(&a.out)?;
    let ds = load(&a.data, kind_for(a.solver.model, a.solver.loss))?;
    let groups = resolve_groups(&a.groups, &ds, a.solver.seed)?;
    let (fit, tuning) = if a.tune {
        let (_, report) = tune_direct(&a.solver, &ds, &groups.0)?;
        let summary = TuningSummary {
            grid: report.grid,
            validation_loss: report.validation_loss,
            chosen_index: report.chosen_index,
            grid_scale: a.solver.grid_scale.into(),
            validation_fraction: a.solver.validation_fraction,
            warnings: report.warnings,
        };
        (report.refit, Some(summary))
    } else {
        let eps = a.epsilon.expect("clap requires --epsilon without --tune");
        let cfg = fit_config(&a.solver, eps);
        let fit = match a.solver.model.direct() {
            Some(m) => m.fit(ds.x.view(), ds.y.view(), &groups.0, &cfg)?,
            None => {
                let d = groups.0.sqrt_sizes();
                fit_latent_overlap(ds.x.view(), ds.y.view(), &groups.0, &d, eps, a.solver.loss.into(), &cfg)?
            }
        };
        (fit, None)
    };
    log_fit(&fit);
    let converged = fit.clone();
    write_text(
        &a.out,
        &to_json(&build_model_report(a.solver.model, &ds, groups, fit, tuning)),
    )?;
    not_converged(&converged)
}

fn cmd_tune(a: TuneArgs) -> Result<()> {
    check_input(&a.data.data, "--data")?;
    if let Some(g) = &a.groups.groups {
        check_input(g, "--groups")?;
    }
    check_output(&a.out)?;
    if let Some(t) = &a.table {
        check_output(t)?;
    }
    let ds = load(&a.data, kind_for(a.solver.model, a.solver.loss))?;
    let groups = resolve_groups(&a.groups, &ds, a.solver.seed)?;
    let (_, report) = tune_direct(&a.solver, &ds, &groups.0)?;
    log_fit(&report.refit);
    let mut json = report.to_json();
    json.push('\n');
    write_text(&a.out, &json)?;
    if let Some(t) = &a.table {
        write_text(t, &report.to_csv())?;
    }
    not_converged(&report.refit)
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    check_input(&a.model, "--model")?;
    check_input(&a.data, "--data")?;
    check_output(&a.out)?;
    let text = std::fs::read_to_string(&a.model).map_err(|e| GwglError::io(display(&a.model), e))?;
    let m: ModelReport =
        serde_json::from_str(&text).map_err(|e| GwglError::Parse(format!("--model {}: {e}", display(&a.model))))?;
    let kind = if m.loss == Loss::Logloss {
        ResponseKind::Binary
    } else {
        ResponseKind::Continuous
    };
    let response = a.response.clone().unwrap_or_else(|| m.response.clone());
    let raw = load_dataset(&a.data, &response, kind)?;
    if raw.feature_names != m.features {
        return Err(GwglError::input(format!(
            "--data {}: columns {:?} do not match the model's {:?}",
            display(&a.data),
            raw.feature_names,
            m.features
        )));
    }
    let x = match &m.standardization {
        Some(st) => st.apply(raw.x.view())?,
        None => raw.x.clone(),
    };
    let objective = match &m.fit.latent {
        Some(dec) => eval_latent_objective(dec, x.view(), raw.y.view(), m.epsilon, m.loss)?,
        None => eval_objective(&m.fit.beta, x.view(), raw.y.view(), &m.groups, m.epsilon, m.loss)?,
    };
    let pred = x.dot(&ArrayView1::from(&m.fit.beta));
    let y = raw.y.as_slice().expect("contiguous");
    let p = pred.as_slice().expect("contiguous");
    let (mad_v, accuracy) = if m.loss == Loss::Logloss {
        let hits = y.iter().zip(p).filter(|(a, b)| (**b >= 0.0) == (**a > 0.0)).count();
        (None, Some(hits as f64 / y.len() as f64))
    } else {
        (Some(mad(y, p)?), None)
    };
    let meta = meta_path(&a.data);
    let oracle = if meta.is_file() && m.loss != Loss::Logloss {
        match DatasetMeta::load(&meta)?.truth {
            Some(t) => {
                let beta = m.original_scale.as_ref().map_or(&m.fit.beta, |o| &o.beta);
                Some(oracle_scores(beta, &t.beta, &t.sigma, t.noise_var)?)
            }
            None => None,
        }
    } else {
        None
    };
    let report = EvaluationReport {
        model: m.model,
        n: raw.n(),
        epsilon: m.epsilon,
        objective,
        mean_loss: m.loss.mean(raw.y.view(), pred.view()),
        mad: mad_v,
        accuracy,
        oracle,
    };
    write_text(&a.out, &to_json(&report))
}

fn check_outcome<T: Serialize>(report: &T, pass: bool, out: &Option<PathBuf>, what: &str) -> Result<()> {
    emit(out, &to_json(report))?;
    if pass {
        Ok(())
    } else {
        Err(GwglError::numerical(format!("{what} check failed")))
    }
}

fn cmd_oracle(c: OracleCommand) -> Result<()> {
    match c {
        OracleCommand::Mixture {
            q,
            seed,
            max_support,
            dim,
            out,
        } => {
            if let Some(o) = &out {
                check_output(o)?;
            }
            let r = oracle::mixture_check(q, seed, max_support, dim)?;
            check_outcome(&r, r.pass, &out, "mixture")
        }
        OracleCommand::DroBound { instances, seed, out } => {
            if let Some(o) = &out {
                check_output(o)?;
            }
            let r = oracle::dro_bound_check(seed, instances)?;
            check_outcome(&r, r.pass, &out, "DRO bound")
        }
        OracleCommand::DualNorm {
            vectors,
            max_dim,
            seed,
            out,
        } => {
            if let Some(o) = &out {
                check_output(o)?;
            }
            let r = oracle::dual_norm_check(seed, vectors, max_dim)?;
            check_outcome(&r, r.pass, &out, "dual norm")
        }
        OracleCommand::Grouping { fits, n, seed, out } => {
            if let Some(o) = &out {
                check_output(o)?;
            }
            let r = oracle::grouping_check(seed, fits, n)?;
            check_outcome(&r, r.pass, &out, "grouping")
        }
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    if !a.out_dir.is_dir() {
        return Err(GwglError::input(format!(
            "--out-dir {}: not a directory",
            display(&a.out_dir)
        )));
    }
    let base = match a.axis {
        AxisArg::Snr => SweepConfig::snr_default(),
        AxisArg::Rho => SweepConfig::rho_default(),
    };
    let values = match (a.values, a.points, a.axis) {
        (Some(v), _, _) => v,
        (None, Some(k), AxisArg::Snr) => log_space(0.5, 2.0, k),
        (None, Some(_), AxisArg::Rho) => return Err(GwglError::input("--points applies to the snr axis only")),
        (None, None, _) => base.values.clone(),
    };
    let cfg = SweepConfig {
        axis: match a.axis {
            AxisArg::Snr => SweepAxis::Snr,
            AxisArg::Rho => SweepAxis::Rho,
        },
        values,
        datasets: a.datasets,
        n_train: a.n_train,
        n_test: a.n_test,
        group_sizes: a.group_sizes,
        outlier_prob: a.outlier_prob,
        clusters: a.clusters.0,
        true_groups: a.true_groups,
        standardize: !a.no_standardize,
        grid_size: a.grid_size,
        grid_scale: a.grid_scale.into(),
        seed: a.seed,
        ..base
    };
    let report = run_sweep(&cfg)?;
    write_text(&a.out_dir.join("summary.csv"), &report.summary_csv())?;
    write_text(&a.out_dir.join("records.csv"), &report.records_csv())?;
    let mut json = report.to_json();
    json.push('\n');
    write_text(&a.out_dir.join("report.json"), &json)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("GWGL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| GwglError::input(format!("GWGL_THREADS must be a positive integer, got '{v}'")))?;
    // a pool may already exist when run() is called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Tune(a) => cmd_tune(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::OracleCheck { check } => cmd_oracle(check),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}
