mod common;

use rand::seq::SliceRandom;
use rrm_core::calibration::{fit_threshold, ThresholdGrid};
use rrm_core::rng::stream;

#[test]
fn noiseless_telemetry_recovers_the_planted_threshold() {
    let grid = ThresholdGrid::default();
    for seed in 0..5 {
        for t_star in [-90.0, -82.0, -75.5] {
            let records = common::planted_telemetry(seed, t_star, grid.step, 0.0);
            let fit = fit_threshold(&records, grid).unwrap();
            assert_eq!(fit.best_threshold_dbm, t_star, "seed {seed}");
        }
    }
}

#[test]
fn curve_ignores_record_order_and_best_is_a_grid_point() {
    let grid = ThresholdGrid::default();
    let records = common::planted_telemetry(7, -82.0, grid.step, 0.02);
    let mut shuffled = records.clone();
    shuffled.shuffle(&mut stream(7, "shuffle", &[]));
    let a = fit_threshold(&records, grid).unwrap();
    let b = fit_threshold(&shuffled, grid).unwrap();
    assert_eq!(a, b);
    assert!(grid.points().unwrap().contains(&a.best_threshold_dbm));
}
