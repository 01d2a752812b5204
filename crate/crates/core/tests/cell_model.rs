mod common;

use cellflux::cell_model::{
    build_envelope, identity_residual, solve_cell_model, ModelParams, SolverConfig,
};
use cellflux::monotone::{
    derivative_mismatch, periodicity_mismatch, verify_cooperative, verify_subsolution,
    verify_supersolution, LatticePoint,
};
use cellflux::Error;
use rand::Rng;

fn random_points(seed: u64, count: usize, period: f64) -> Vec<LatticePoint> {
    let mut rng = common::rng(seed);
    (0..count)
        .map(|_| LatticePoint {
            t: rng.gen_range(0.0..period),
            x: rng.gen_range(0.01..10.0),
            y: rng.gen_range(0.01..10.0),
        })
        .collect()
}

#[test]
fn equilibrium_covariance_over_random_constants() {
    let mut rng = common::rng(11);
    for draw in 0..20 {
        let (params, x_star, y_star) = common::autonomous_draw(&mut rng);
        let cfg = SolverConfig {
            intervals: 64,
            ..SolverConfig::default()
        };
        let sol = solve_cell_model(&params, &cfg).unwrap();
        assert!(sol.unique, "draw {draw}");
        let (x, y) = sol.periodic_solution();
        let ex = x.values().iter().fold(0.0_f64, |m, v| m.max((v - x_star).abs()));
        let ey = y.values().iter().fold(0.0_f64, |m, v| m.max((v - y_star).abs()));
        assert!(ex <= 1e-8 && ey <= 1e-8, "draw {draw}: errors {ex:e} {ey:e}");
    }
}

#[test]
fn envelopes_pass_their_inequalities() {
    let mut rng = common::rng(5);
    for draw in 0..50 {
        let params = common::periodic_draw(&mut rng);
        let env = build_envelope(&params, 512).unwrap();
        let sub = verify_subsolution(&params, env.envelope.sub()).unwrap();
        let sup = verify_supersolution(&params, env.envelope.sup()).unwrap();
        assert!(sub.passed && sub.worst_margin() > 0.0, "draw {draw}: {sub:?}");
        assert!(sup.passed && sup.worst_margin() > 0.0, "draw {draw}: {sup:?}");
        assert!(verify_cooperative(&params, &env.envelope, 9).unwrap().passed);
    }
}

#[test]
fn analytic_jacobian_matches_differences() {
    let mut rng = common::rng(3);
    let params = common::periodic_draw(&mut rng);
    let points = random_points(4, 100, params.period());
    assert!(derivative_mismatch(&params, &points).unwrap() <= 1e-5);
    assert!(derivative_mismatch(&ModelParams::demo(), &points).unwrap() <= 1e-5);
}

#[test]
fn right_hand_side_is_periodic() {
    let params = ModelParams::demo();
    let points = random_points(8, 200, 3.0);
    assert!(periodicity_mismatch(&params, &points).unwrap() <= 1e-12);
}

#[test]
fn identity_residual_shrinks_with_refinement() {
    let params = ModelParams::demo();
    let residual = |n: usize| {
        let cfg = SolverConfig {
            intervals: n,
            ..SolverConfig::default()
        };
        let sol = solve_cell_model(&params, &cfg).unwrap();
        identity_residual(&params, &sol.periodic_solution().1).unwrap()
    };
    let coarse = residual(512);
    let fine = residual(1024);
    assert!(fine <= coarse || fine <= 1e-9, "{coarse:e} -> {fine:e}");
    assert!(fine <= 1e-6);
}

#[test]
fn violated_condition_is_rejected() {
    let base = ModelParams::demo();
    let params = ModelParams::new(base.alpha.clone(), base.gamma.clone(), 2.0, 2.0, 0.2).unwrap();
    match solve_cell_model(&params, &SolverConfig::default()) {
        Err(Error::ConditionViolated { d }) => assert!((d + 1.0).abs() < 1e-9),
        other => panic!("expected ConditionViolated, got {other:?}"),
    }
}
