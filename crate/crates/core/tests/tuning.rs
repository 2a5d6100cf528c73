use gwgl::data::{generate_synthetic, standardize, SyntheticSpec};
use gwgl::metrics::{mad, mpi, wgd, Direction};
use gwgl::solvers::{FitConfig, Model};
use gwgl::tuning::{tune_epsilon, tuning_grid_scaled, GridScale, TuneConfig};
use gwgl::GroupStructure;
use ndarray::array;

fn dataset() -> gwgl::data::Dataset {
    standardize(
        &generate_synthetic(&SyntheticSpec {
            group_sizes: vec![1, 3, 2],
            rho_w: 0.7,
            snr: Some(2.0),
            noise_var: None,
            outlier_prob: 0.1,
            n: 60,
            seed: 2,
            rho_jitter: None,
        })
        .unwrap(),
    )
    .unwrap()
}

#[test]
fn mean_and_sum_grids_differ_by_the_sample_size() {
    let ds = dataset();
    let s = GroupStructure::from_sizes(&[1, 3, 2]).unwrap();
    let n = ds.n() as f64;
    let sum = tuning_grid_scaled(ds.x.view(), ds.y.view(), &s, Model::GlassoL2, 7, GridScale::Sum).unwrap();
    let mean = tuning_grid_scaled(ds.x.view(), ds.y.view(), &s, Model::GlassoL2, 7, GridScale::Mean).unwrap();
    for (a, b) in sum.iter().zip(&mean) {
        assert!((a / b - n).abs() < 1e-9 * n);
    }
    let lr_sum = tuning_grid_scaled(ds.x.view(), ds.y.view(), &s, Model::GwglLr, 7, GridScale::Sum).unwrap();
    let lr_mean = tuning_grid_scaled(ds.x.view(), ds.y.view(), &s, Model::GwglLr, 7, GridScale::Mean).unwrap();
    for (a, b) in lr_sum.iter().zip(&lr_mean) {
        assert!((a / b - n.sqrt()).abs() < 1e-9 * n);
    }
}

#[test]
fn tuning_refits_at_the_validation_minimizer() {
    let ds = dataset();
    let s = GroupStructure::from_sizes(&[1, 3, 2]).unwrap();
    let cfg = TuneConfig {
        grid_size: 8,
        ..Default::default()
    };
    let report = tune_epsilon(&ds, &s, Model::GwglLr, &cfg).unwrap();
    let losses: Vec<f64> = report.validation_loss.iter().map(|v| v.unwrap()).collect();
    let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(losses[report.chosen_index], best);
    assert_eq!(report.chosen_epsilon, report.grid[report.chosen_index]);
    let direct = Model::GwglLr
        .fit(
            ds.x.view(),
            ds.y.view(),
            &s,
            &FitConfig::with_epsilon(report.chosen_epsilon),
        )
        .unwrap();
    assert_eq!(direct.beta, report.refit.beta);
}

#[test]
fn metric_examples() {
    assert_eq!(mad(&[1.0, 2.0, 3.0], &[1.0, 4.0, 0.0]).unwrap(), 2.0);
    assert_eq!(mad(&[0.0; 4], &[1.0, -2.0, 3.0, 5.0]).unwrap(), 2.5);
    let m = mpi(&[1.0, 2.0], &[vec![2.0, 2.0], vec![4.0, 1.0]], Direction::Minimize).unwrap();
    assert_eq!((m.index, m.value), (0, 50.0));
    let x = array![[0.6, 0.8], [0.8, 0.6]];
    let s = GroupStructure::from_sizes(&[2]).unwrap();
    // x_0'x_1 = 0.96
    assert!((wgd(&[1.0, 0.52], x.view(), &s).unwrap() - 0.5).abs() < 1e-12);
}
