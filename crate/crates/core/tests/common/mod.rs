//! Reference minimizers and brute-force oracles shared by the integration
//! tests. Nothing here calls into the solvers under test.

#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nelder–Mead with a randomly oriented initial simplex of edge `scale`.
pub fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: f64,
    max_evals: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        for (j, vj) in v.iter_mut().enumerate() {
            let jitter: f64 = rng.random_range(-0.5..0.5);
            *vj += scale * if i == j { 1.0 } else { 0.3 * jitter };
        }
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    // adaptive coefficients for higher dimensions
    let nf = n as f64;
    let (alpha, gamma, rho, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        let diam = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() < 1e-16 && diam < 1e-13 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(alpha * gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(alpha * rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = best[j] + shrink * (simplex[i][j] - best[j]);
                    }
                    vals[i] = f(&simplex[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best].clone(), vals[best])
}

/// Restarted Nelder–Mead from several start points; each round restarts from
/// the incumbent with a shrinking, freshly oriented simplex.
pub fn reference_minimize(f: &dyn Fn(&[f64]) -> f64, starts: &[Vec<f64>], seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let mut cur = nelder_mead(f, s, 1.0, 20_000, &mut rng);
        for round in 0..60 {
            let scale = 0.5f64.powi(round % 20) * 0.5;
            let next = nelder_mead(f, &cur.0, scale.max(1e-9), 20_000, &mut rng);
            if next.1 < cur.1 {
                cur = next;
            }
        }
        if best.as_ref().is_none_or(|b| cur.1 < b.1) {
            best = Some(cur);
        }
    }
    best.unwrap()
}

pub fn lad(x: &Array2<f64>, y: &Array1<f64>, b: &[f64]) -> f64 {
    let n = y.len() as f64;
    (0..y.len())
        .map(|i| (y[i] - x.row(i).iter().zip(b).map(|(a, c)| a * c).sum::<f64>()).abs())
        .sum::<f64>()
        / n
}

pub fn logloss(x: &Array2<f64>, y: &Array1<f64>, b: &[f64]) -> f64 {
    let n = y.len() as f64;
    (0..y.len())
        .map(|i| {
            let m = y[i] * x.row(i).iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum::<f64>()
        / n
}

pub fn squared(x: &Array2<f64>, y: &Array1<f64>, b: &[f64]) -> f64 {
    let n = y.len() as f64;
    (0..y.len())
        .map(|i| {
            let r = y[i] - x.row(i).iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            r * r
        })
        .sum::<f64>()
        / n
}

/// `Σ_l √p_l ‖b^l‖` for contiguous groups of the given sizes.
pub fn group_pen(b: &[f64], sizes: &[usize]) -> f64 {
    let mut start = 0;
    let mut total = 0.0;
    for &s in sizes {
        total += (s as f64).sqrt() * b[start..start + s].iter().map(|v| v * v).sum::<f64>().sqrt();
        start += s;
    }
    total
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0))
}

/// Solves a small dense square system by Gaussian elimination with partial
/// pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Maximizes (or minimizes) `c'x` over `{x ≥ 0 : A x = b}` by enumerating
/// every basis of `rank` columns drawn from a row-reduced system. Rows of `A`
/// must already be linearly independent.
pub fn vertex_enumeration(a: &[Vec<f64>], b: &[f64], c: &[f64], maximize: bool) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let mut best: Option<f64> = None;
    for basis in subsets(n, m) {
        let sub: Vec<Vec<f64>> = (0..m).map(|r| basis.iter().map(|&j| a[r][j]).collect()).collect();
        if let Some(xb) = solve_dense(sub, b.to_vec()) {
            if xb.iter().all(|&v| v >= -1e-12) {
                let val: f64 = basis.iter().zip(&xb).map(|(&j, v)| c[j] * v).sum();
                best = Some(match best {
                    None => val,
                    Some(cur) if maximize => cur.max(val),
                    Some(cur) => cur.min(val),
                });
            }
        }
    }
    best
}
