//! Crank-Nicolson reference solver: conservation, boundary isolation and
//! agreement with the closed form where no resonances are involved.

use num_complex::Complex64;
use tunneltime::oracle_cn::{compare_with_model, evolve, GridSpec};
use tunneltime::quantities::BarrierSpec;
use tunneltime::shutter::{build_model_with, BuildOptions};

fn reference() -> BarrierSpec {
    BarrierSpec::new(0.3, 4.0, 0.067, 0.001).unwrap()
}

#[test]
fn norm_is_conserved_without_absorber() {
    let spec = reference();
    let mut grid = GridSpec::study_base(&spec, &[2.0, 4.0]).unwrap();
    grid.absorber = None;
    let run = evolve(&spec, &grid).unwrap();
    let drift = run.norm_drift.expect("drift is reported on Dirichlet grids");
    assert!(drift <= 1e-10, "norm drift {drift:e}");
}

#[test]
fn absorber_runs_do_not_report_drift() {
    let spec = reference();
    let grid = GridSpec::study_base(&spec, &[4.0]).unwrap();
    assert!(evolve(&spec, &grid).unwrap().norm_drift.is_none());
}

fn max_relative_change(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let mut diff = 0.0f64;
    let mut peak = 0.0f64;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            diff = diff.max((x - y).norm());
            peak = peak.max(y.norm());
        }
    }
    diff / peak
}

#[test]
fn doubling_the_domain_leaves_probes_unchanged() {
    let spec = reference();
    let probes = [2.0, 4.0, 8.0];
    let grid = GridSpec::default_for(&spec, 3.0, &probes, 0.05).unwrap();
    let mut wide = grid.clone();
    let far = 8.0;
    wide.x_left = 2.0 * grid.x_left;
    wide.x_right = far + 2.0 * (grid.x_right - far);
    let a = evolve(&spec, &grid).unwrap();
    let b = evolve(&spec, &wide).unwrap();
    assert_eq!(a.times.len(), b.times.len());
    let change = max_relative_change(&a.values, &b.values);
    assert!(change <= 1e-6, "probe values moved by {change:e}");
}

#[test]
fn free_shutter_matches_the_closed_form() {
    let spec = BarrierSpec::new(0.0, 4.0, 0.067, 0.001).unwrap();
    let model = build_model_with(&spec, &BuildOptions::default()).unwrap();
    let grid = GridSpec::default_for(&spec, 10.0, &[2.0, 4.0, 8.0], 0.05).unwrap();
    let run = evolve(&spec, &grid).unwrap();
    for d in compare_with_model(&model, &run, 0.5, 10.0).unwrap() {
        assert!(d.relative_linf <= 1e-3, "x = {}: {:e} at {} fs", d.x_nm, d.relative_linf, d.worst_time);
    }
}

#[test]
fn short_margins_are_rejected() {
    let spec = reference();
    let mut grid = GridSpec::default_for(&spec, 5.0, &[4.0], 0.05).unwrap();
    grid.x_left = -1.0;
    assert!(evolve(&spec, &grid).unwrap_err().is_validation());

    let mut grid = GridSpec::default_for(&spec, 5.0, &[4.0], 0.05).unwrap();
    grid.probes = vec![grid.x_right + 1.0];
    assert!(evolve(&spec, &grid).unwrap_err().is_validation());

    assert!(GridSpec::sized_for(&spec, 0.0, 1e-3, 1.0, &[4.0], 0.05).is_err());
}

#[test]
fn probe_nodes_are_grid_points() {
    let spec = reference();
    let grid = GridSpec::study_base(&spec, &[2.013]).unwrap();
    let run = evolve(&spec, &grid).unwrap();
    let node = run.probe_nodes[0];
    assert!((node - 2.013).abs() <= 0.5 * grid.dx + 1e-12);
    let k = (node - grid.x_left) / grid.dx;
    assert!((k - k.round()).abs() < 1e-9);
}
