//! Latent overlapping-group fits via covariate duplication.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::objective::{check_design, eval_latent_objective, Loss, Problem};
use super::{apg, check_labels, pdhg, FitConfig, FitResult};
use crate::error::{GwglError, Result};
use crate::groups::{Duplication, GroupStructure};
use crate::norms::LatentDecomposition;

/// Fits `min loss(Xβ) + ε Σ_l d_l‖v^l‖_2` s.t. `β = Σ_l v^l`, `supp(v^l) ⊂ G^l`.
///
/// Column `j` of `X` is copied once per group containing it; the resulting
/// non-overlapping problem (weights `d_l` in place of √p_l) is solved with the
/// solver matching `loss`, and `β̂` is the sum of the latent blocks.
#[allow(clippy::too_many_arguments)]
pub fn fit_latent_overlap(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    structure: &GroupStructure,
    d: &[f64],
    epsilon: f64,
    loss: Loss,
    config: &FitConfig,
) -> Result<FitResult> {
    let config = FitConfig {
        epsilon,
        ..config.clone()
    };
    config.validate()?;
    structure.validate(x.ncols())?;
    check_design(x, y, structure.p)?;
    if d.len() != structure.num_groups() {
        return Err(GwglError::dim(format!(
            "{} latent weights for {} groups",
            d.len(),
            structure.num_groups()
        )));
    }
    if d.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(GwglError::input("latent group weights must be positive"));
    }
    if loss == Loss::Logloss {
        check_labels(y)?;
    }

    let dup = Duplication::new(structure);
    let mut expanded = Array2::<f64>::zeros((x.nrows(), dup.expanded_dim()));
    for (k, &j) in dup.source.iter().enumerate() {
        expanded.column_mut(k).assign(&x.column(j));
    }
    let prob = Problem {
        x: expanded.view(),
        y,
        structure: &dup.expanded,
        weights: d.to_vec(),
        penalty: epsilon,
        loss,
    };
    let inner = match loss {
        Loss::Lad => pdhg::solve(&prob, &config),
        Loss::Logloss | Loss::L2 => apg::solve(&prob, &config),
    };

    let decomposition = LatentDecomposition {
        vectors: dup.latent_vectors(&inner.beta),
        weights: d.to_vec(),
    };
    let beta = decomposition.reconstruct();
    let objective = eval_latent_objective(&decomposition, x, y, epsilon, loss)?;
    Ok(FitResult {
        beta,
        objective,
        latent: Some(decomposition),
        ..inner
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{fit_gwgl_lr, Model};
    use ndarray::array;

    fn design() -> (Array2<f64>, ndarray::Array1<f64>) {
        let x = array![
            [1.0, 0.2, -0.5],
            [0.3, -1.0, 0.8],
            [-0.7, 0.4, 0.1],
            [0.5, 0.9, -0.2],
            [1.2, -0.3, 0.6],
            [-0.4, 0.1, -1.1]
        ];
        let y = array![1.0, -0.5, -0.2, 0.9, 1.4, -1.0];
        (x, y)
    }

    #[test]
    fn partition_matches_direct_solver() {
        let (x, y) = design();
        let s = GroupStructure::from_sizes(&[1, 2]).unwrap();
        let cfg = FitConfig::with_epsilon(0.05);
        let direct = fit_gwgl_lr(x.view(), y.view(), &s, &cfg).unwrap();
        let latent = fit_latent_overlap(x.view(), y.view(), &s, &s.sqrt_sizes(), 0.05, Loss::Lad, &cfg).unwrap();
        assert!((direct.objective - latent.objective).abs() < 1e-7);
        for (a, b) in direct.beta.iter().zip(&latent.beta) {
            assert!((a - b).abs() < 1e-4, "{:?} vs {:?}", direct.beta, latent.beta);
        }
        let l2 = Model::GlassoL2.fit(x.view(), y.view(), &s, &cfg).unwrap();
        let l2_latent = fit_latent_overlap(x.view(), y.view(), &s, &s.sqrt_sizes(), 0.05, Loss::L2, &cfg).unwrap();
        for (a, b) in l2.beta.iter().zip(&l2_latent.beta) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn large_penalty_zeroes_everything() {
        let (x, y) = design();
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], true).unwrap();
        let fit = fit_latent_overlap(
            x.view(),
            y.view(),
            &s,
            &[1.0, 1.0],
            50.0,
            Loss::Lad,
            &FitConfig::default(),
        )
        .unwrap();
        assert!(fit.beta.iter().all(|&b| b == 0.0));
        assert!(fit.latent.unwrap().vectors.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn latent_support_stays_in_groups() {
        let (x, y) = design();
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], true).unwrap();
        let fit = fit_latent_overlap(
            x.view(),
            y.view(),
            &s,
            &[1.0, 1.0],
            0.02,
            Loss::L2,
            &FitConfig::default(),
        )
        .unwrap();
        let dec = fit.latent.as_ref().unwrap();
        assert_eq!(dec.vectors[0][2], 0.0);
        assert_eq!(dec.vectors[1][0], 0.0);
        assert_eq!(dec.reconstruct(), fit.beta);
    }
}
