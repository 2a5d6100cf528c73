//! Proximal operators of the group penalty.

use crate::error::{GwglError, Result};
use crate::groups::GroupStructure;

/// Prox of `λ Σ_l √p_l ‖·^l‖_2`: blockwise shrinkage `v^l · max(0, 1 − λ√p_l/‖v^l‖_2)`.
pub fn prox_group_l2(v: &[f64], lambda: f64, structure: &GroupStructure) -> Result<Vec<f64>> {
    structure.require_partition()?;
    if v.len() != structure.p {
        return Err(GwglError::dim(format!(
            "prox input has length {} but structure has p={}",
            v.len(),
            structure.p
        )));
    }
    if !(lambda >= 0.0) {
        return Err(GwglError::input(format!("prox parameter must be >= 0, got {lambda}")));
    }
    let thresholds: Vec<f64> = structure.sqrt_sizes().iter().map(|w| lambda * w).collect();
    Ok(block_shrink(v, structure, &thresholds))
}

/// Blockwise shrinkage with an explicit threshold per group.
pub fn block_shrink(v: &[f64], structure: &GroupStructure, thresholds: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (g, &thr) in structure.groups.iter().zip(thresholds) {
        let norm = g.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
        if norm <= thr || norm == 0.0 {
            continue;
        }
        let scale = 1.0 - thr / norm;
        for &i in g {
            out[i] = v[i] * scale;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_groups() -> GroupStructure {
        GroupStructure::from_sizes(&[2, 3]).unwrap()
    }

    #[test]
    fn small_blocks_vanish() {
        let s = two_groups();
        // ‖(0.5, 0.5)‖ = 0.707 < √2·1
        let out = prox_group_l2(&[0.5, 0.5, 3.0, 0.0, 0.0], 1.0, &s).unwrap();
        assert_eq!(&out[..2], &[0.0, 0.0]);
        assert!(out[2] > 0.0);
    }

    #[test]
    fn zero_lambda_is_identity() {
        let v = [1.0, -2.0, 3.0, 0.5, -0.25];
        assert_eq!(prox_group_l2(&v, 0.0, &two_groups()).unwrap(), v.to_vec());
    }

    #[test]
    fn closed_form_shrinkage() {
        let s = GroupStructure::from_sizes(&[2]).unwrap();
        let lambda = 2.5 / 2f64.sqrt();
        let out = prox_group_l2(&[3.0, 4.0], lambda, &s).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-12 && (out[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_overlap_and_bad_dims() {
        let s = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]], true).unwrap();
        assert!(prox_group_l2(&[1.0, 1.0, 1.0], 1.0, &s).is_err());
        assert!(prox_group_l2(&[1.0], 1.0, &two_groups()).is_err());
    }

    proptest! {
        #[test]
        fn firmly_nonexpansive(
            u in proptest::collection::vec(-5.0f64..5.0, 5),
            v in proptest::collection::vec(-5.0f64..5.0, 5),
            lambda in 0.0f64..3.0,
        ) {
            let s = two_groups();
            let pu = prox_group_l2(&u, lambda, &s).unwrap();
            let pv = prox_group_l2(&v, lambda, &s).unwrap();
            let dp: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
            let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let nd = dp.iter().map(|x| x * x).sum::<f64>();
            let inner = dp.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
            // ‖Pu − Pv‖² ≤ ⟨Pu − Pv, u − v⟩ ≤ ‖u − v‖²
            prop_assert!(nd <= inner + 1e-10);
            prop_assert!(nd.sqrt() <= d.iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-12);
        }
    }
}
