//! Small dense helpers shared by the solvers.

use ndarray::{Array1, ArrayView2};

/// Largest singular value of `x` by power iteration on `XᵀX`.
///
/// Runs at most `max_iters` iterations and stops when the Rayleigh quotient
/// changes by less than `tol` (relative). The start vector is a fixed
/// non-symmetric sequence so the result is deterministic. Power iteration
/// approaches from below, so the estimate is inflated by 1% and capped by the
/// Frobenius norm, which is always an upper bound.
pub fn spectral_norm(x: ArrayView2<f64>, max_iters: usize, tol: f64) -> f64 {
    let p = x.ncols();
    let frob = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if p == 0 || frob == 0.0 {
        return 0.0;
    }
    let mut v: Array1<f64> = (0..p).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64).collect();
    v /= v.dot(&v).sqrt();
    let mut est = 0.0f64;
    for _ in 0..max_iters {
        let xv = x.dot(&v);
        let w = x.t().dot(&xv);
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            break;
        }
        let next = nw.sqrt();
        v = w / nw;
        let done = (next - est).abs() <= tol * next;
        est = next;
        if done {
            break;
        }
    }
    (est * 1.01).min(frob).max(est)
}

/// `log(1 + exp(−m))` without overflow.
pub fn softplus_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `1 / (1 + exp(m))`, the derivative magnitude of `softplus_neg`.
pub fn sigmoid_neg(m: f64) -> f64 {
    if m > 0.0 {
        let e = (-m).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + m.exp())
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
