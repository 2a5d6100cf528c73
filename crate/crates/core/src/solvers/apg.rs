//! Accelerated proximal gradient with function-value restart for the smooth
//! losses (logloss, squared loss).
//!
//! Whenever an accelerated step would increase the objective, momentum is
//! reset and a plain proximal gradient step is taken from the last iterate
//! instead, so the objective trace never increases.

use ndarray::ArrayView1;

use super::objective::{Loss, Problem};
use super::prox::block_shrink;
use super::{FitConfig, FitResult, Monitor};
use crate::linalg::spectral_norm;

pub(crate) fn solve(prob: &Problem, config: &FitConfig) -> FitResult {
    let n = prob.n() as f64;
    let p = prob.structure.p;
    let mut monitor = Monitor::new(config.tol, config.max_iters);
    let mut x = vec![0.0; p];
    let mut fx = prob.objective(&x);
    monitor.trace.push(fx);

    if prob.loss == Loss::Logloss && prob.penalty == 0.0 {
        let first = prob.y[0];
        if prob.y.iter().all(|&v| v == first) {
            return FitResult {
                beta: x,
                objective: fx,
                iterations: 0,
                converged: false,
                epsilon: prob.penalty,
                loss: prob.loss,
                certificate: None,
                latent: None,
                diagnostic: Some(
                    "all labels belong to one class and epsilon = 0: the logloss has no minimizer (unbounded risk)"
                        .into(),
                ),
                trace: monitor.trace,
            };
        }
    }

    let norm = spectral_norm(prob.x, 50, 1e-10);
    let lipschitz = match prob.loss {
        Loss::Logloss => norm * norm / (4.0 * n),
        Loss::L2 => 2.0 * norm * norm / n,
        Loss::Lad => unreachable!("LAD is handled by the primal-dual solver"),
    };
    if lipschitz == 0.0 {
        return FitResult {
            beta: x,
            objective: fx,
            iterations: 0,
            converged: true,
            epsilon: prob.penalty,
            loss: prob.loss,
            certificate: Some(0.0),
            latent: None,
            diagnostic: None,
            trace: monitor.trace,
        };
    }
    let step = config.primal_step.unwrap_or(1.0 / lipschitz);
    let thresholds = prob.thresholds(step);
    let prox_step = |point: &[f64]| -> Vec<f64> {
        let pred = prob.x.dot(&ArrayView1::from(point));
        let grad = prob.loss.gradient(prob.x, prob.y, pred.view());
        let moved: Vec<f64> = point.iter().zip(grad.iter()).map(|(a, g)| a - step * g).collect();
        block_shrink(&moved, prob.structure, &thresholds)
    };

    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut certificate = None;
    let mut iters = 0;
    for k in 1..=config.max_iters {
        iters = k;
        let mut z = prox_step(&y);
        let mut fz = prob.objective(&z);
        if fz > fx {
            // restart from the last iterate
            t = 1.0;
            z = prox_step(&x);
            fz = prob.objective(&z);
            if fz > fx {
                z.clone_from(&x);
                fz = fx;
            }
            y.clone_from(&z);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = z.iter().zip(&x).map(|(a, b)| a + momentum * (a - b)).collect();
            t = t_next;
        }
        x = z;
        fx = fz;
        monitor.trace.push(fx);

        if k % 10 == 0 && monitor.window_settled() {
            let viol = prob.optimality_violation(&x);
            certificate = Some(viol);
            if viol <= config.certificate_tol {
                converged = true;
                break;
            }
        }
    }
    if certificate.is_none() || !converged {
        certificate = Some(prob.optimality_violation(&x));
    }
    let objective = prob.objective(&x);
    FitResult {
        beta: x,
        objective,
        iterations: iters,
        converged,
        epsilon: prob.penalty,
        loss: prob.loss,
        certificate,
        latent: None,
        diagnostic: None,
        trace: monitor.trace,
    }
}
