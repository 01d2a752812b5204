use std::f64::consts::PI;

use cellflux::linear::{
    decay_to_periodic, linear_residual, scaled_small_a_limit, solve_linear_periodic,
    LinearPeriodicProblem, LinearPeriodicSolver,
};
use cellflux::periodic::{GridFunction, PeriodicForcing};
use proptest::prelude::*;

/// `b(t) = c0 + sum_k (c_k cos(k w t) + s_k sin(k w t))`, `w = 2 pi / p`.
struct Harmonics {
    period: f64,
    c0: f64,
    terms: Vec<(f64, f64)>,
}

impl Harmonics {
    fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    fn eval(&self, t: f64) -> f64 {
        self.terms.iter().enumerate().fold(self.c0, |acc, (i, &(c, s))| {
            let w = self.omega(i + 1);
            acc + c * (w * t).cos() + s * (w * t).sin()
        })
    }

    /// Closed-form periodic solution of `y' + a y = b`.
    fn periodic_solution(&self, a: f64, t: f64) -> f64 {
        self.terms.iter().enumerate().fold(self.c0 / a, |acc, (i, &(c, s))| {
            let w = self.omega(i + 1);
            let d = a * a + w * w;
            let cos_coef = (a * c - w * s) / d;
            let sin_coef = (a * s + w * c) / d;
            acc + cos_coef * (w * t).cos() + sin_coef * (w * t).sin()
        })
    }

    fn grid(&self, n: usize) -> GridFunction {
        GridFunction::from_fn(self.period, n, |t| self.eval(t))
    }
}

fn sample_harmonics(period: f64) -> Harmonics {
    Harmonics {
        period,
        c0: 1.5,
        terms: vec![(0.7, -0.3), (0.2, 0.4), (-0.1, 0.05)],
    }
}

fn sup_error(h: &Harmonics, a: f64, y: &GridFunction) -> f64 {
    (0..=y.intervals())
        .map(|k| (y.values()[k] - h.periodic_solution(a, y.time(k))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn closed_form_oracle_across_decay_products() {
    for &period in &[1.0, 2.0 * PI] {
        let h = sample_harmonics(period);
        let b = h.grid(2048);
        for &ap in &[0.05, 1.0, 5.0, 20.0] {
            let a = ap / period;
            let y = solve_linear_periodic(&LinearPeriodicProblem::new(a, b.clone()).unwrap()).unwrap();
            let err = sup_error(&h, a, &y);
            assert!(err <= 1e-9, "a p = {ap}, p = {period}: error {err:e}");
        }
    }
}

#[test]
fn fourth_order_in_the_grid() {
    let h = sample_harmonics(1.0);
    let a = 3.0;
    let errors: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let y = solve_linear_periodic(&LinearPeriodicProblem::new(a, h.grid(n)).unwrap()).unwrap();
            sup_error(&h, a, &y)
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 12.0, "errors {errors:?}");
    }
}

#[test]
fn residual_small_on_smooth_data() {
    let h = sample_harmonics(1.0);
    let b = h.grid(1024);
    let y = solve_linear_periodic(&LinearPeriodicProblem::new(0.8, b.clone()).unwrap()).unwrap();
    assert!(linear_residual(0.8, &b, &y) < 1e-8);
}

#[test]
fn decay_gap_follows_the_exponential() {
    let b = PeriodicForcing::sinusoid(1.0, 2.0, 1.0, 1).unwrap().sample(512).unwrap();
    let a = 0.7;
    let path = decay_to_periodic(&LinearPeriodicProblem::new(a, b).unwrap(), 5.0, 6).unwrap();
    assert_eq!(path.periods(), 6);
    let g0 = path.gap_at_period(0);
    for k in 1..=6 {
        let expect = g0 * (-a * k as f64).exp();
        assert!((path.gap_at_period(k) - expect).abs() <= 1e-10 * g0, "k = {k}");
    }
}

#[test]
fn small_rate_trend_is_monotone() {
    let b = PeriodicForcing::sinusoid(1.0, 2.0, 1.0, 1).unwrap();
    let values = scaled_small_a_limit(&b, &[1.0, 0.1, 0.01, 0.001], 2048).unwrap();
    assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    assert!(*values.last().unwrap() < 1e-2);
}

fn grid_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0_f64, n).prop_map(|mut v| {
        v.push(v[0]);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_is_linear(
        b1 in grid_strategy(64),
        b2 in grid_strategy(64),
        c in -3.0..3.0_f64,
        a in 0.01..50.0_f64,
    ) {
        let solver = LinearPeriodicSolver::new(a, 1.0, 64).unwrap();
        let g1 = GridFunction::new(1.0, b1).unwrap();
        let g2 = GridFunction::new(1.0, b2).unwrap();
        let combined = solver.solve(&g1.scale(c).add(&g2));
        let separate = solver.solve(&g1).scale(c).add(&solver.solve(&g2));
        let scale = 1.0 + combined.sup_norm();
        prop_assert!(combined.sup_distance(&separate) <= 1e-12 * scale);
    }

    #[test]
    fn nonnegative_forcing_gives_nonnegative_solution(
        b in prop::collection::vec(0.0..4.0_f64, 32),
        a in 0.01..20.0_f64,
    ) {
        let mut b = b;
        b.push(b[0]);
        let g = GridFunction::new(1.0, b).unwrap();
        let y = LinearPeriodicSolver::new(a, 1.0, 32).unwrap().solve(&g);
        prop_assert!(y.min() >= -1e-12 * (1.0 + y.sup_norm()));
    }

    #[test]
    fn constant_shift_adds_constant_over_a(
        b in grid_strategy(32),
        shift in -2.0..2.0_f64,
        a in 0.05..10.0_f64,
    ) {
        let solver = LinearPeriodicSolver::new(a, 2.0, 32).unwrap();
        let g = GridFunction::new(2.0, b).unwrap();
        let base = solver.solve(&g);
        let shifted = solver.solve(&g.shift(shift));
        let diff = shifted.sub(&base);
        let scale = 1.0 + base.sup_norm() + (shift / a).abs();
        for v in diff.values() {
            prop_assert!((v - shift / a).abs() <= 1e-11 * scale);
        }
    }
}
