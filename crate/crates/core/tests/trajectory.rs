mod common;

use cellflux::cell_model::{solve_cell_model, ModelParams, SolverConfig};
use cellflux::periodic::GridFunction;
use cellflux::trajectory::{attraction_metrics, integrate};
use rand::Rng;

fn demo_solution() -> (GridFunction, GridFunction) {
    let sol = solve_cell_model(&ModelParams::demo(), &SolverConfig::default()).unwrap();
    assert!(sol.unique);
    sol.periodic_solution()
}

#[test]
fn cooperative_flow_preserves_order() {
    let p = ModelParams::demo();
    let low = integrate(&p, 0.5, 0.3, 1.0 / 500.0, 10).unwrap();
    let high = integrate(&p, 1.0, 0.4, 1.0 / 500.0, 10).unwrap();
    for (a, b) in low.states.iter().zip(&high.states) {
        assert!(a[0] <= b[0] && a[1] <= b[1], "{a:?} vs {b:?}");
    }
}

#[test]
fn positive_states_stay_positive() {
    let p = ModelParams::demo();
    let mut rng = common::rng(21);
    for _ in 0..10 {
        let (x0, y0) = (rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0));
        let traj = integrate(&p, x0, y0, 1.0 / 500.0, 20).unwrap();
        assert!(traj.states.iter().all(|s| s[0] > 0.0 && s[1] > 0.0), "from ({x0}, {y0})");
    }
}

#[test]
fn periodic_solution_is_invariant() {
    let (x, y) = demo_solution();
    let traj = integrate(&ModelParams::demo(), x.values()[0], y.values()[0], 1.0 / 2000.0, 10).unwrap();
    let report = attraction_metrics(&traj, &x, &y, 1e-4).unwrap();
    assert!(
        report.distances.iter().all(|&d| d < 1e-6),
        "{:?}",
        report.distances
    );
}

#[test]
fn distances_match_reference_run() {
    // d_1..d_6 from (1, 0.4), reference IVP run at tight tolerance
    let reference = [
        0.867543633304088,
        0.32102175382159726,
        0.17264379294421572,
        0.08647287343546278,
        0.041241780498277814,
        0.019129241641236527,
    ];
    let (x, y) = demo_solution();
    let traj = integrate(&ModelParams::demo(), 1.0, 0.4, 1.0 / 2000.0, 6).unwrap();
    let report = attraction_metrics(&traj, &x, &y, 1e-4).unwrap();
    for (k, (d, r)) in report.distances.iter().zip(reference).enumerate() {
        assert!((d - r).abs() <= 1e-8, "d_{} = {d} vs {r}", k + 1);
    }
}

#[test]
fn demo_trajectory_is_attracted() {
    let (x, y) = demo_solution();
    let traj = integrate(&ModelParams::demo(), 1.0, 0.4, 1.0 / 2000.0, 20).unwrap();
    let report = attraction_metrics(&traj, &x, &y, 1e-4).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn halving_the_step_gains_fourth_order() {
    let p = ModelParams::demo();
    let end = |per: usize| integrate(&p, 1.0, 0.4, 1.0 / per as f64, 1).unwrap().last();
    let reference = end(400);
    let err = |s: [f64; 2]| (s[0] - reference[0]).abs() + (s[1] - reference[1]).abs();
    let coarse = err(end(100));
    let fine = err(end(200));
    assert!(coarse / fine >= 12.0, "{coarse:e} / {fine:e}");
}
