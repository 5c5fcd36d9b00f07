mod common;

use proptest::prelude::*;
use vrtrace::features::{self, Standardizer};
use vrtrace::geometry::{UnitQuaternion, Vec3};
use vrtrace::maze::{generate_maze, Branching};
use vrtrace::seed;
use vrtrace::telemetry::Trajectory;

#[test]
fn features_match_brute_force_oracles() {
    for case in 0..100 {
        common::feature_oracle_check(case).unwrap();
    }
}

#[test]
fn straight_run_summary() {
    let m = generate_maze(3, 4, 4, Branching::Low).unwrap();
    let samples = (0..11).map(|k| {
        (
            Vec3::new(0.5 + 0.1 * k as f64, 1.6, 0.5),
            UnitQuaternion::IDENTITY,
        )
    });
    let t = Trajectory::from_samples("s", "c", 0.1, samples).unwrap();
    let s = features::summarize(&t, &m).unwrap();
    assert!((s.distance_traveled - 1.0).abs() < 1e-12);
    assert_eq!(s.coverage, 2);
    assert_eq!(s.mean_abs_curvature, 0.0);
    assert_eq!(s.total_rotation, 0.0);
}

#[test]
fn model_rows_line_up_with_series() {
    let m = generate_maze(8, 5, 5, Branching::High).unwrap();
    let t = common::random_trajectory(&mut seed::rng(8), &m, 50);
    let rows = features::to_model_sequence(&t).unwrap();
    let curv = features::curvature_series(&t).unwrap();
    let rot = features::rotation_series(&t).unwrap();
    assert_eq!(rows.len(), 48);
    let ps: Vec<Vec3> = t.positions().collect();
    for (k, r) in rows.iter().enumerate() {
        assert_eq!(r[0], ps[k + 1].x - ps[k].x);
        assert_eq!(r[1], ps[k + 1].z - ps[k].z);
        assert_eq!(r[2], curv[k]);
        assert_eq!(r[3], rot[k]);
    }
}

#[test]
fn standardizer_matches_two_pass_moments() {
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|k| vec![(k as f64 * 0.7).sin() * 3.0 + 2.0, 5.0, k as f64])
        .collect();
    let s = Standardizer::fit(&rows).unwrap();
    for j in 0..3 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / rows.len() as f64;
        assert!((s.mean[j] - mean).abs() < 1e-9 * mean.abs().max(1.0));
        let expected_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        assert!((s.std[j] - expected_std).abs() < 1e-9 * expected_std);
    }
    let z = s.apply_all(&rows);
    let m0 = z.iter().map(|r| r[0]).sum::<f64>() / z.len() as f64;
    assert!(m0.abs() < 1e-12);
}

proptest! {
    #[test]
    fn translation_leaves_distance_and_curvature(case in 0u64..1000, dx in -50.0f64..50.0, dy in -5.0f64..5.0, dz in -50.0f64..50.0) {
        let m = generate_maze(case, 4, 4, Branching::High).unwrap();
        let t = common::random_trajectory(&mut seed::rng(case), &m, 40);
        let shifted = t.map_positions(|p| Vec3::new(p.x + dx, p.y + dy, p.z + dz));
        let (a, b) = (features::distance_traveled(&t), features::distance_traveled(&shifted));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        let (ca, cb) = (features::curvature_series(&t).unwrap(), features::curvature_series(&shifted).unwrap());
        for (x, y) in ca.iter().zip(&cb) {
            // displacements shorter than the degeneracy floor may change class after shifting
            prop_assert!((x - y).abs() <= 1e-6 || *x == 0.0 || *y == 0.0);
        }
        prop_assert_eq!(features::rotation_series(&t).unwrap(), features::rotation_series(&shifted).unwrap());
    }
}
