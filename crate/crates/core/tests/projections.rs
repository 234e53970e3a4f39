mod common;

use common::*;
use proptest::prelude::*;
use smre::windows::enumerate;
use smre::*;

#[test]
fn dykstra_matches_qp_oracle_on_dense_slabs() {
    let mut r = rng(2024);
    for case in 0..25 {
        let n = 2 + case % 9;
        let k = 1 + case % 6;
        let rows: Vec<Vec<f64>> = (0..k).map(|_| normals(&mut r, n)).collect();
        let q = uniform(&mut r, 0.2, 1.0);
        let h: Vec<f64> = normals(&mut r, n).iter().map(|x| 2.0 * x).collect();
        let sys = ConstraintSystem::dense(Grid::line(n).unwrap(), rows.clone(), q).unwrap();
        let rep = dykstra(&h, &sys, 1e-13, 1_000_000).unwrap();
        let oracle = qp_project_slabs(&h, &rows, &vec![q; k]);
        assert!(rep.converged, "case {case}");
        assert!(
            dist(&rep.solution, &oracle) < 1e-6,
            "case {case}: {}",
            dist(&rep.solution, &oracle)
        );
    }
}

#[test]
fn dykstra_matches_qp_oracle_on_windows() {
    let g = Grid::line(5).unwrap();
    let ws = enumerate(g, 2, 3).unwrap();
    let sys =
        ConstraintSystem::windowed(ws, Weighting::Normalized, Transform::Identity, 0.5).unwrap();
    let rows: Vec<Vec<f64>> = (0..ws.len())
        .map(|i| sys.weight_vector(i).unwrap())
        .collect();
    let mut r = rng(7);
    for _ in 0..10 {
        let h: Vec<f64> = normals(&mut r, 5).iter().map(|x| 1.5 * x).collect();
        let rep = dykstra(&h, &sys, 1e-13, 1_000_000).unwrap();
        let oracle = qp_project_slabs(&h, &rows, &vec![0.5; rows.len()]);
        assert!(dist(&rep.solution, &oracle) < 1e-6);
    }
}

#[test]
fn squared_transform_projection_is_feasible_and_stationary() {
    let g = Grid::square(5).unwrap();
    let ws = enumerate(g, 1, 3).unwrap();
    let sys = ConstraintSystem::windowed(ws, Weighting::Indicator, Transform::Square, 2.0).unwrap();
    let mut r = rng(3);
    let h: Vec<f64> = normals(&mut r, 25).iter().map(|x| 1.2 * x).collect();
    let rep = dykstra(&h, &sys, 1e-12, 1_000_000).unwrap();
    assert!(rep.converged);
    assert!(sys.statistic(&rep.solution) <= 2.0 * (1.0 + 1e-6));
    // variational inequality <h - P h, x - P h> <= 0 for feasible x
    for t in [0.0, 0.3, 0.9] {
        let x: Vec<f64> = rep.solution.iter().map(|v| t * v).collect();
        let lhs: f64 = h
            .iter()
            .zip(&rep.solution)
            .zip(&x)
            .map(|((hv, p), xv)| (hv - p) * (xv - p))
            .sum();
        assert!(lhs <= 1e-7, "t = {t}: {lhs}");
    }
}

#[test]
fn group_projection_equals_individual_projections() {
    let g = Grid::square(6).unwrap();
    let ws = enumerate(g, 2, 2).unwrap();
    let sys =
        ConstraintSystem::windowed(ws, Weighting::Normalized, Transform::Identity, 0.3).unwrap();
    let part = sys.partition().unwrap().clone();
    let mut r = rng(11);
    let v = normals(&mut r, 36);
    for j in 0..part.len() {
        let p = project_group(&v, &sys, j).unwrap();
        let mut e = v.clone();
        for i in part.group_indices(&ws, j) {
            e = project_band(&e, &sys.weight_vector(i).unwrap(), 0.3).unwrap();
        }
        assert!(dist(&p, &e) < 1e-14);
    }
}

proptest! {
    #[test]
    fn band_projection_is_idempotent_and_nonexpansive(
        x in prop::collection::vec(-5.0f64..5.0, 6),
        y in prop::collection::vec(-5.0f64..5.0, 6),
        w in prop::collection::vec(-2.0f64..2.0, 6),
        q in 0.05f64..2.0,
    ) {
        prop_assume!(w.iter().map(|a| a * a).sum::<f64>() > 1e-3);
        let px = project_band(&x, &w, q).unwrap();
        let py = project_band(&y, &w, q).unwrap();
        prop_assert!(dist(&project_band(&px, &w, q).unwrap(), &px) <= 1e-12);
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
        prop_assert!(dot(&w, &px).abs() <= q * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn ball_projection_is_radial_idempotent_and_nonexpansive(
        x in prop::collection::vec(-5.0f64..5.0, 8),
        y in prop::collection::vec(-5.0f64..5.0, 8),
        r2 in 0.1f64..10.0,
    ) {
        let support = [1usize, 2, 5, 6];
        let px = project_ball(&x, &support, r2).unwrap();
        let py = project_ball(&y, &support, r2).unwrap();
        let ss: f64 = support.iter().map(|&i| x[i] * x[i]).sum();
        let gamma = if ss > r2 { (r2 / ss).sqrt() } else { 1.0 };
        for i in 0..8 {
            let expected = if support.contains(&i) { gamma * x[i] } else { x[i] };
            prop_assert!((px[i] - expected).abs() <= 1e-10);
        }
        prop_assert!(dist(&project_ball(&px, &support, r2).unwrap(), &px) <= 1e-12);
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
    }

    #[test]
    fn dykstra_output_is_feasible(
        h in prop::collection::vec(-4.0f64..4.0, 12),
        q in 0.2f64..1.5,
    ) {
        let g = Grid::line(12).unwrap();
        let sys = ConstraintSystem::windowed(enumerate(g, 1, 5).unwrap(), Weighting::Normalized, Transform::Identity, q).unwrap();
        let rep = dykstra(&h, &sys, 1e-10, 1_000_000).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(sys.statistic(&rep.solution) <= q * (1.0 + 1e-6));
        // projection never moves farther than to any feasible point (0 is feasible)
        prop_assert!(dist(&rep.solution, &h) <= dist(&[0.0; 12], &h) + 1e-9);
    }
}
