//! Synthetic data generation, CSV ingestion, standardization and splitting.
//!
//! Random draws come from `ChaCha8Rng` seeded with the recorded seed, so a
//! dataset is reproducible from its metadata with this implementation.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Cholesky, DMatrix};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;

/// Name of the generator recorded in metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

/// Offset of outlier responses, in units of the noise standard deviation.
const OUTLIER_SHIFT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Continuous,
    Binary,
}

/// Recipe for a synthetic regression dataset with grouped predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub group_sizes: Vec<usize>,
    /// Within-group correlation.
    pub rho_w: f64,
    /// Signal-to-noise ratio `β*'Σβ*/σ²`; exclusive with `noise_var`.
    pub snr: Option<f64>,
    /// Noise variance `σ²`; exclusive with `snr`.
    pub noise_var: Option<f64>,
    /// Probability that a response is shifted by `5σ`.
    pub outlier_prob: f64,
    pub n: usize,
    pub seed: u64,
    /// When set to `[a, b]`, the correlation actually used is `rho_w·U` with
    /// `U` uniform on `[a, b]`, drawn once per dataset.
    #[serde(default)]
    pub rho_jitter: Option<[f64; 2]>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.is_empty() || self.group_sizes.contains(&0) {
            return Err(GwglError::input("group sizes must be non-empty and positive"));
        }
        if !(self.rho_w >= 0.0 && self.rho_w < 1.0) {
            return Err(GwglError::input(format!(
                "within-group correlation must lie in [0, 1), got {} (the covariance is not positive definite otherwise)",
                self.rho_w
            )));
        }
        if !(self.outlier_prob >= 0.0 && self.outlier_prob < 1.0) {
            return Err(GwglError::input(format!(
                "outlier probability must lie in [0, 1), got {}",
                self.outlier_prob
            )));
        }
        match (self.snr, self.noise_var) {
            (Some(s), None) if s > 0.0 && s.is_finite() => {}
            (None, Some(v)) if v > 0.0 && v.is_finite() => {}
            (Some(_), Some(_)) | (None, None) => return Err(GwglError::input("set exactly one of snr and noise_var")),
            _ => return Err(GwglError::input("snr and noise_var must be positive")),
        }
        if self.n == 0 {
            return Err(GwglError::input("sample count must be positive"));
        }
        if let Some([a, b]) = self.rho_jitter {
            if !(0.0 <= a && a <= b && b <= 1.0) {
                return Err(GwglError::input(format!(
                    "jitter interval [{a}, {b}] must lie in [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn structure(&self) -> Result<GroupStructure> {
        GroupStructure::from_sizes(&self.group_sizes)
    }

    /// 0.5 on the predictors of even-numbered groups (counting from 1).
    pub fn true_beta(&self) -> Vec<f64> {
        self.group_sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &s)| std::iter::repeat_n(if l % 2 == 1 { 0.5 } else { 0.0 }, s))
            .collect()
    }
}

/// Block-constant covariance: 1 on the diagonal, `rho` within groups.
pub fn block_covariance(group_sizes: &[usize], rho: f64) -> Vec<Vec<f64>> {
    let labels: Vec<usize> = group_sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &s)| std::iter::repeat_n(l, s))
        .collect();
    let p = labels.len();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    if i == j {
                        1.0
                    } else if labels[i] == labels[j] {
                        rho
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Parameters behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub noise_var: f64,
    /// Within-group correlation actually used (after any jitter).
    pub rho: f64,
}

/// Per-column affine map `x ↦ (x − shift)/scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.shift.len() {
            return Err(GwglError::dim(format!(
                "standardization has {} columns, data has {}",
                self.shift.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.shift[j]) / self.scale[j]);
        }
        Ok(out)
    }

    /// Coefficients on the original scale, `β_j / scale_j`, and the intercept
    /// `−Σ_j shift_j β_j / scale_j` implied by the centering.
    pub fn coef_to_original(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = beta.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let intercept = -raw.iter().zip(&self.shift).map(|(b, m)| b * m).sum::<f64>();
        (raw, intercept)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub kind: ResponseKind,
    pub feature_names: Vec<String>,
    pub response_name: String,
    pub standardization: Option<Standardization>,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, kind: ResponseKind) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(GwglError::dim(format!(
                "X has {} rows but y has {}",
                x.nrows(),
                y.len()
            )));
        }
        if kind == ResponseKind::Binary {
            if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(GwglError::input(format!(
                    "binary response {} at row {i} is not ±1",
                    y[i]
                )));
            }
        }
        let p = x.ncols();
        Ok(Dataset {
            x,
            y,
            kind,
            feature_names: (1..=p).map(|j| format!("x{j}")).collect(),
            response_name: "y".into(),
            standardization: None,
            truth: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(ndarray::Axis(0), idx),
            y: self.y.select(ndarray::Axis(0), idx),
            ..self.clone()
        }
    }

    /// Labels `sign(y)` (zero maps to +1) for classification experiments.
    pub fn binarize(&self) -> Dataset {
        Dataset {
            y: self.y.mapv(|v| if v < 0.0 { -1.0 } else { 1.0 }),
            kind: ResponseKind::Binary,
            ..self.clone()
        }
    }
}

/// Draws a dataset following `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rho = match spec.rho_jitter {
        Some([a, b]) if a < b => spec.rho_w * rng.random_range(a..=b),
        Some([a, _]) => spec.rho_w * a,
        None => spec.rho_w,
    };
    let p = spec.p();
    let sigma = block_covariance(&spec.group_sizes, rho);
    let beta = spec.true_beta();
    let signal: f64 = (0..p)
        .map(|i| (0..p).map(|j| beta[i] * sigma[i][j] * beta[j]).sum::<f64>())
        .sum();
    let noise_var = match (spec.snr, spec.noise_var) {
        (Some(snr), _) => {
            if signal == 0.0 {
                return Err(GwglError::input(
                    "the true coefficients are all zero, so the SNR does not determine the noise; set noise_var",
                ));
            }
            signal / snr
        }
        (None, Some(v)) => v,
        (None, None) => unreachable!("validated"),
    };
    let sd = noise_var.sqrt();
    let chol = Cholesky::new(DMatrix::from_fn(p, p, |i, j| sigma[i][j]))
        .ok_or_else(|| GwglError::numerical("covariance is not positive definite"))?;
    let l = chol.l();

    let mut x = Array2::<f64>::zeros((spec.n, p));
    let mut y = Array1::<f64>::zeros(spec.n);
    let mut z = vec![0.0; p];
    for i in 0..spec.n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for r in 0..p {
            x[(i, r)] = (0..=r).map(|c| l[(r, c)] * z[c]).sum();
        }
        let outlier = rng.random::<f64>() < spec.outlier_prob;
        let eta: f64 = rng.sample(StandardNormal);
        let mean: f64 = x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum();
        y[i] = mean + sd * eta + if outlier { OUTLIER_SHIFT * sd } else { 0.0 };
    }
    let mut ds = Dataset::new(x, y, ResponseKind::Continuous)?;
    ds.truth = Some(GroundTruth {
        beta,
        sigma,
        noise_var,
        rho,
    });
    Ok(ds)
}

/// Centers every column and scales it to unit ℓ2 norm, so that `x_i'x_j` is
/// the sample correlation. Returns the transformed dataset with its record.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let n = ds.n();
    if n == 0 {
        return Err(GwglError::input("cannot standardize an empty dataset"));
    }
    let mut shift = Vec::with_capacity(ds.p());
    let mut scale = Vec::with_capacity(ds.p());
    for (j, col) in ds.x.columns().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let norm = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
        let spread = col.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        if norm == 0.0 || spread <= 1e-14 * mean.abs() {
            return Err(GwglError::input(format!(
                "column '{}' (index {j}) is constant and cannot be standardized",
                ds.feature_names[j]
            )));
        }
        shift.push(mean);
        scale.push(norm);
    }
    let record = Standardization { shift, scale };
    let x = record.apply(ds.x.view())?;
    Ok(Dataset {
        x,
        standardization: Some(record),
        ..ds.clone()
    })
}

fn parse_cell(cell: &str, row: usize, col: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| GwglError::Parse(format!("row {row}, column '{col}': '{cell}' is not a finite number")))
}

/// Reads a CSV with a header row. Every column other than `response` is a
/// predictor. Binary responses may be coded `{0, 1}` or `{−1, 1}`.
pub fn load_dataset(path: &Path, response: &str, kind: ResponseKind) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| GwglError::Parse(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| GwglError::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let resp_col = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| GwglError::input(format!("response column '{response}' not found in {}", path.display())))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != resp_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut values = Vec::new();
    let mut y = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| GwglError::Parse(format!("{} row {row}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(GwglError::Parse(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let v = parse_cell(cell, row, &headers[j])?;
            if j == resp_col {
                y.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let n = y.len();
    if kind == ResponseKind::Binary {
        let zero_one = y.iter().all(|&v| v == 0.0 || v == 1.0);
        for (i, v) in y.iter_mut().enumerate() {
            *v = match *v {
                1.0 => 1.0,
                0.0 if zero_one => -1.0,
                -1.0 if !zero_one => -1.0,
                other => {
                    return Err(GwglError::input(format!(
                        "row {}: label {other} is outside the {{0, 1}} / {{-1, 1}} encodings",
                        i + 1
                    )))
                }
            };
        }
    }
    let x = Array2::from_shape_vec((n, feature_names.len()), values).map_err(|e| GwglError::dim(e.to_string()))?;
    let mut ds = Dataset::new(x, Array1::from(y), kind)?;
    ds.feature_names = feature_names;
    ds.response_name = response.to_string();
    Ok(ds)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let shown = path.display().to_string();
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| GwglError::io(&shown, e))?;
    tmp.write_all(bytes).map_err(|e| GwglError::io(&shown, e))?;
    tmp.as_file().sync_all().map_err(|e| GwglError::io(&shown, e))?;
    tmp.persist(path).map_err(|e| GwglError::io(&shown, e.error))?;
    Ok(())
}

/// CSV text with the feature columns followed by the response. Values use
/// the shortest representation that reads back to the same `f64`.
pub fn dataset_to_csv(ds: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = ds.feature_names.clone();
    header.push(ds.response_name.clone());
    let io = |e: csv::Error| GwglError::Parse(e.to_string());
    w.write_record(&header).map_err(io)?;
    for (row, y) in ds.x.rows().into_iter().zip(&ds.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| GwglError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, dataset_to_csv(ds)?.as_bytes())
}

/// Sidecar describing how a dataset file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub rng: String,
    pub seed: Option<u64>,
    pub spec: Option<SyntheticSpec>,
    pub kind: ResponseKind,
    pub response: String,
    pub standardization: Option<Standardization>,
    pub truth: Option<GroundTruth>,
}

impl DatasetMeta {
    pub fn describe(ds: &Dataset, spec: Option<&SyntheticSpec>) -> Self {
        DatasetMeta {
            rng: RNG_ALGORITHM.into(),
            seed: spec.map(|s| s.seed),
            spec: spec.cloned(),
            kind: ds.kind,
            response: ds.response_name.clone(),
            standardization: ds.standardization.clone(),
            truth: ds.truth.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GwglError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| GwglError::Parse(format!("{}: {e}", path.display())))
    }
}

/// `data.csv` → `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Row counts for a split of `n` rows: validation and test get
/// `floor(n·f)`, training gets the rest.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(GwglError::input(format!(
            "split fractions must be non-negative, got {fractions:?}"
        )));
    }
    if fractions[0] <= 0.0 {
        return Err(GwglError::input("the training fraction must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(GwglError::input(format!("split fractions sum to {total}, not 1")));
    }
    // the small slack keeps e.g. 10 × 0.3 from rounding down to 2
    let count = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let val = count(fractions[1]);
    let test = count(fractions[2]);
    Ok([n - val - test, val, test])
}

/// Seeded shuffle into train, validation and test parts. Rows keep their
/// original order within each part.
pub fn split_dataset(ds: &Dataset, fractions: [f64; 3], seed: u64) -> Result<[Dataset; 3]> {
    let [_, val, test] = split_sizes(ds.n(), fractions)?;
    let mut idx: Vec<usize> = (0..ds.n()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_idx = idx[..test].to_vec();
    let mut val_idx = idx[test..test + val].to_vec();
    let mut train_idx = idx[test + val..].to_vec();
    for part in [&mut train_idx, &mut val_idx, &mut test_idx] {
        part.sort_unstable();
    }
    Ok([ds.subset(&train_idx), ds.subset(&val_idx), ds.subset(&test_idx)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            group_sizes: vec![1, 3, 5, 7],
            rho_w: 0.3,
            snr: Some(1.0),
            noise_var: None,
            outlier_prob: 0.3,
            n: 50,
            seed: 4,
            rho_jitter: None,
        }
    }

    #[test]
    fn true_beta_marks_even_groups() {
        let b = spec().true_beta();
        let mut expected = vec![0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0];
        expected.extend([0.5; 7]);
        assert_eq!(b, expected);
    }

    #[test]
    fn zero_correlation_is_identity() {
        let s = block_covariance(&[2, 2], 0.0);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn spec_validation() {
        let bad = |f: fn(&mut SyntheticSpec)| {
            let mut s = spec();
            f(&mut s);
            generate_synthetic(&s).is_err()
        };
        assert!(bad(|s| s.rho_w = 1.0));
        assert!(bad(|s| s.outlier_prob = 1.0));
        assert!(bad(|s| s.noise_var = Some(1.0)));
        assert!(bad(|s| s.snr = None));
        assert!(bad(|s| s.group_sizes = vec![3]));
    }

    #[test]
    fn generation_is_reproducible() {
        let a = generate_synthetic(&spec()).unwrap();
        let b = generate_synthetic(&spec()).unwrap();
        assert_eq!(a, b);
        let mut other = spec();
        other.seed = 5;
        assert_ne!(generate_synthetic(&other).unwrap().x, a.x);
        let t = a.truth.unwrap();
        // signal 0.25·(3 + 6ρ + 7 + 42ρ) with ρ = 0.3
        assert!((t.noise_var - 0.25 * (10.0 + 48.0 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn jitter_scales_correlation() {
        let mut s = spec();
        s.rho_w = 0.8;
        s.rho_jitter = Some([0.2, 0.4]);
        let rho = generate_synthetic(&s).unwrap().truth.unwrap().rho;
        assert!((0.16..=0.32).contains(&rho));
    }

    #[test]
    fn standardize_invariants() {
        let ds = generate_synthetic(&spec()).unwrap();
        let st = standardize(&ds).unwrap();
        for col in st.x.columns() {
            assert!(col.sum().abs() <= 1e-10);
            assert!((col.dot(&col) - 1.0).abs() <= 1e-10);
        }
        let again = standardize(&st).unwrap();
        for (a, b) in again.x.iter().zip(st.x.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let c = Dataset::new(
            array![[1.0, 2.0], [1.0, 3.0]],
            array![0.0, 1.0],
            ResponseKind::Continuous,
        )
        .unwrap();
        let err = standardize(&c).unwrap_err().to_string();
        assert!(err.contains("x1"), "{err}");
    }

    #[test]
    fn coefficient_mapping_preserves_predictions() {
        let ds = generate_synthetic(&spec()).unwrap();
        let st = standardize(&ds).unwrap();
        let beta: Vec<f64> = (0..16).map(|j| (j as f64 - 7.0) * 0.1).collect();
        let (raw, b0) = st.standardization.as_ref().unwrap().coef_to_original(&beta);
        for i in 0..ds.n() {
            let a: f64 = st.x.row(i).iter().zip(&beta).map(|(x, b)| x * b).sum();
            let b: f64 = ds.x.row(i).iter().zip(&raw).map(|(x, b)| x * b).sum::<f64>() + b0;
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sizes(10, [0.5, 0.3, 0.2]).unwrap(), [5, 3, 2]);
        assert_eq!(split_sizes(7, [1.0, 0.0, 0.0]).unwrap(), [7, 0, 0]);
        assert!(split_sizes(10, [0.5, -0.1, 0.6]).is_err());
        assert!(split_sizes(10, [0.5, 0.3, 0.3]).is_err());
        assert!(split_sizes(10, [0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let mut ds = generate_synthetic(&spec()).unwrap();
        // tag each row by its index through y
        ds.y = Array1::from_iter((0..ds.n()).map(|i| i as f64));
        let parts = split_dataset(&ds, [0.6, 0.2, 0.2], 9).unwrap();
        let again = split_dataset(&ds, [0.6, 0.2, 0.2], 9).unwrap();
        assert_eq!(parts, again);
        let mut all: Vec<usize> = parts.iter().flat_map(|d| d.y.iter().map(|&v| v as usize)).collect();
        assert_eq!(all.len(), 50);
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }
}
