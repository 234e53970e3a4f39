use smre::projections::dykstra;
use smre::{ConstraintSystem, Grid};
use smre_web::{
    peak_example_impl, quantile_samples_impl, regress_impl, two_slab_path_impl, RegressParams,
};

#[test]
fn two_slab_path_ends_at_the_dense_dykstra_projection() {
    let (h, a, qa, b, qb) = ([3.0, 2.0], [1.0, 0.0], 1.0, [1.0, 1.0], 1.5);
    let path = two_slab_path_impl(h, a, qa, b, qb, 10_000, 1e-13).unwrap();
    assert_eq!(&path[..2], &h);
    let end = &path[path.len() - 2..];

    // A dense system has a single threshold; the slabs are rescaled to `q = 1`.
    let scaled = ConstraintSystem::dense(
        Grid::line(2).unwrap(),
        vec![
            a.iter().map(|x| x / qa).collect(),
            b.iter().map(|x| x / qb).collect(),
        ],
        1.0,
    )
    .unwrap();
    let reference = dykstra(&h, &scaled, 1e-14, 100_000).unwrap();
    assert!(reference.converged);
    for (x, r) in end.iter().zip(&reference.solution) {
        assert!((x - r).abs() < 1e-9, "{end:?} vs {:?}", reference.solution);
    }
    assert!((end[0] * a[0] + end[1] * a[1]).abs() <= qa + 1e-9);
    assert!((end[0] * b[0] + end[1] * b[1]).abs() <= qb + 1e-9);
}

#[test]
fn two_slab_path_of_a_feasible_point_is_constant() {
    let path =
        two_slab_path_impl([0.2, -0.1], [1.0, 0.0], 1.0, [0.0, 1.0], 1.0, 50, 1e-12).unwrap();
    assert_eq!(path.len(), 6);
    assert!(path.chunks(2).all(|p| p == [0.2, -0.1]));
}

#[test]
fn quantile_samples_are_reproducible() {
    let a = quantile_samples_impl(64, 8, 0.5, 200, 11).unwrap();
    let b = quantile_samples_impl(64, 8, 0.5, 200, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 200);
    assert!(a.iter().all(|&t| t > 0.0));
}

#[test]
fn regression_of_the_peak_signal_is_feasible() {
    let example = peak_example_impl(512, 0.3, 5).unwrap();
    let (truth, y) = example.split_at(512);
    let params = RegressParams {
        s_max: 64,
        sigma: 0.3,
        alpha: 0.9,
        lambda: 1.0,
        n_trials: 200,
        seed: 1,
    };
    let fit = regress_impl(y, params).unwrap();
    assert_eq!(fit.estimate().len(), 512);
    assert!(fit.converged());
    assert!(fit.final_statistic() <= fit.q() * (1.0 + 1e-3));
    let err = |u: &[f64]| {
        u.iter()
            .zip(truth)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
    };
    assert!(err(&fit.estimate()) < err(y));
}

#[test]
fn invalid_parameters_are_errors() {
    assert!(quantile_samples_impl(16, 32, 1.0, 200, 0).is_err());
    assert!(quantile_samples_impl(16, 4, -1.0, 200, 0).is_err());
}
