//! Correlation-based pre-grouping of predictors by normalized spectral
//! clustering.
//!
//! The points being clustered are the columns of a standardized design. For
//! unit-norm columns `‖x_i − x_j‖² = 2(1 − ρ_ij)`, so the Gaussian similarity
//! is a monotone function of sample correlation.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Neighbors per point in the union-kNN graph; smallest connected k when unset.
    pub k_neighbors: Option<usize>,
    /// Number of clusters; eigengap heuristic when unset.
    pub n_clusters: Option<usize>,
    /// Gaussian scale; mean k-th nearest neighbor distance when unset.
    pub sigma: Option<f64>,
    pub kmeans_restarts: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            k_neighbors: None,
            n_clusters: None,
            sigma: None,
            kmeans_restarts: 10,
            kmeans_iters: 300,
            seed: 0,
        }
    }
}

impl ClusteringConfig {
    fn validate(&self) -> Result<()> {
        if self.k_neighbors == Some(0) || self.n_clusters == Some(0) {
            return Err(GwglError::input("k_neighbors and n_clusters must be positive"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return Err(GwglError::input(format!("sigma must be positive, got {s}")));
            }
        }
        if self.kmeans_restarts == 0 || self.kmeans_iters == 0 {
            return Err(GwglError::input("k-means needs at least one restart and one iteration"));
        }
        Ok(())
    }
}

/// Union-kNN graph with Gaussian edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub weights: Vec<Vec<f64>>,
    pub k: usize,
    pub sigma: f64,
}

/// What the clustering chose along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringDiagnostics {
    /// Laplacian spectrum, ascending.
    pub eigenvalues: Vec<f64>,
    pub k: usize,
    pub sigma: f64,
    pub c: usize,
    pub inertia: f64,
}

fn pairwise_distances(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = points.len();
    let mut d = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            let v = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// For each point, the other points ordered by distance (ties by index).
fn neighbor_order(dist: &[Vec<f64>]) -> Vec<Vec<usize>> {
    (0..dist.len())
        .map(|i| {
            let mut others: Vec<usize> = (0..dist.len()).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
            others
        })
        .collect()
}

fn union_knn(order: &[Vec<usize>], k: usize) -> Vec<Vec<bool>> {
    let p = order.len();
    let mut adj = vec![vec![false; p]; p];
    for (i, nbrs) in order.iter().enumerate() {
        for &j in nbrs.iter().take(k) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    adj
}

fn connected(adj: &[Vec<bool>]) -> bool {
    let p = adj.len();
    let mut seen = vec![false; p];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..p {
            if adj[i][j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    if points.len() < 2 {
        return Err(GwglError::input(format!(
            "clustering needs at least 2 points, got {}",
            points.len()
        )));
    }
    let n = points[0].len();
    if points.iter().any(|v| v.len() != n) {
        return Err(GwglError::dim("points have different dimensions"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GwglError::input("point with non-finite coordinate"));
    }
    Ok(())
}

/// Smallest `k ≥ 1` whose union-kNN graph is connected.
pub fn select_knn_k(points: &[Vec<f64>]) -> Result<usize> {
    check_points(points)?;
    let order = neighbor_order(&pairwise_distances(points));
    // k = p − 1 is the complete graph, so the search always terminates
    Ok((1..points.len())
        .find(|&k| connected(&union_knn(&order, k)))
        .unwrap_or(points.len() - 1))
}

/// Mean distance from each point to its k-th nearest other point.
pub fn select_sigma(points: &[Vec<f64>], k: usize) -> Result<f64> {
    check_points(points)?;
    if k == 0 || k >= points.len() {
        return Err(GwglError::input(format!("k must lie in 1..{}, got {k}", points.len())));
    }
    let dist = pairwise_distances(points);
    let order = neighbor_order(&dist);
    Ok(order.iter().enumerate().map(|(i, o)| dist[i][o[k - 1]]).sum::<f64>() / points.len() as f64)
}

/// Builds the union-kNN Gaussian similarity graph, resolving automatic
/// choices of `k` and `σ` from the points.
pub fn build_similarity_graph(points: &[Vec<f64>], config: &ClusteringConfig) -> Result<SimilarityGraph> {
    check_points(points)?;
    config.validate()?;
    let p = points.len();
    let k = match config.k_neighbors {
        Some(k) if k >= p => {
            return Err(GwglError::input(format!(
                "k_neighbors = {k} must be below the number of points {p}"
            )))
        }
        Some(k) => k,
        None => select_knn_k(points)?,
    };
    let sigma = match config.sigma {
        Some(s) => s,
        None => select_sigma(points, k)?,
    };
    if sigma == 0.0 {
        return Err(GwglError::numerical(
            "similarity scale is 0: all nearest-neighbor distances vanish (identical points)",
        ));
    }
    let dist = pairwise_distances(points);
    let adj = union_knn(&neighbor_order(&dist), k);
    let mut weights = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i != j && adj[i][j] {
                weights[i][j] = (-dist[i][j] * dist[i][j] / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    Ok(SimilarityGraph { weights, k, sigma })
}

/// Index of the largest gap in an ascending spectrum, counted from 1; ties go
/// to the smaller count.
pub fn eigengap_select(eigenvalues: &[f64]) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return Err(GwglError::input("eigengap selection needs at least two eigenvalues"));
    }
    let mut best = 1;
    let mut gap = f64::NEG_INFINITY;
    for i in 1..eigenvalues.len() {
        let g = eigenvalues[i] - eigenvalues[i - 1];
        if g > gap {
            gap = g;
            best = i;
        }
    }
    Ok(best)
}

/// Spectrum and eigenvectors of `I − D^{-1/2} W D^{-1/2}`, ascending.
pub fn normalized_laplacian_spectrum(graph: &SimilarityGraph) -> (Vec<f64>, DMatrix<f64>) {
    let p = graph.weights.len();
    let inv_sqrt: Vec<f64> = graph
        .weights
        .iter()
        .map(|r| {
            let d: f64 = r.iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let lap = DMatrix::from_fn(p, p, |i, j| {
        let off = -inv_sqrt[i] * graph.weights[i][j] * inv_sqrt[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    });
    let eig = SymmetricEigen::new(lap);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One seeded k-means run (k-means++ seeding, Lloyd iterations). Empty
/// clusters are reseeded at the point farthest from its centroid.
fn kmeans_once(rows: &[Vec<f64>], c: usize, iters: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    while centers.len() < c {
        let d: Vec<f64> = rows
            .iter()
            .map(|r| centers.iter().map(|m| sq_dist(r, m)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..iters {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let best = nearest(r, &centers);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let dim = rows[0].len();
        let mut sums = vec![vec![0.0; dim]; c];
        let mut counts = vec![0usize; c];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for g in 0..c {
            if counts[g] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centers[g] = rows[far].clone();
                labels[far] = g;
                changed = true;
            } else {
                centers[g] = sums[g].iter().map(|s| s / counts[g] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = rows.iter().zip(&labels).map(|(r, &l)| sq_dist(r, &centers[l])).sum();
    (labels, inertia)
}

fn nearest(r: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (g, m) in centers.iter().enumerate() {
        let d = sq_dist(r, m);
        if d < bd {
            bd = d;
            best = g;
        }
    }
    best
}

/// Groups the columns of `x` by spectral clustering.
pub fn cluster_predictors(x: ArrayView2<f64>, config: &ClusteringConfig) -> Result<GroupStructure> {
    Ok(cluster_predictors_with_diagnostics(x, config)?.0)
}

pub fn cluster_predictors_with_diagnostics(
    x: ArrayView2<f64>,
    config: &ClusteringConfig,
) -> Result<(GroupStructure, ClusteringDiagnostics)> {
    config.validate()?;
    let p = x.ncols();
    if let Some(c) = config.n_clusters {
        if c > p {
            return Err(GwglError::input(format!("{c} clusters requested for {p} predictors")));
        }
    }
    if p == 1 {
        let s = GroupStructure::singletons(1);
        let diag = ClusteringDiagnostics {
            eigenvalues: vec![0.0],
            k: 0,
            sigma: 0.0,
            c: 1,
            inertia: 0.0,
        };
        return Ok((s, diag));
    }
    let points: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let graph = build_similarity_graph(&points, config)?;
    let (eigenvalues, vectors) = normalized_laplacian_spectrum(&graph);
    let c = match config.n_clusters {
        Some(c) => c,
        None => eigengap_select(&eigenvalues)?,
    };

    let rows: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            let r: Vec<f64> = (0..c).map(|j| vectors[(i, j)]).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter().map(|v| v / norm).collect()
            } else {
                r
            }
        })
        .collect();
    let runs: Vec<(Vec<usize>, f64)> = (0..config.kmeans_restarts)
        .into_par_iter()
        .map(|r| kmeans_once(&rows, c, config.kmeans_iters, config.seed.wrapping_add(r as u64)))
        .collect();
    // lowest inertia wins; the first restart wins ties
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 {
            best = i;
        }
    }
    let (labels, inertia) = runs.into_iter().nth(best).expect("at least one restart");
    let structure = GroupStructure::from_labels(&labels)?;
    let diag = ClusteringDiagnostics {
        eigenvalues,
        k: graph.k,
        sigma: graph.sigma,
        c: structure.num_groups(),
        inertia,
    };
    Ok((structure, diag))
}
