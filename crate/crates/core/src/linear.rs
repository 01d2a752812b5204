//! The periodic solution of `y' + a y = b(t)` for a constant `a > 0`.
//!
//! The solution is the periodic convolution of `b` with the kernel
//! `G(t, s) = e^{-a(t-s)} / (1 - e^{-ap})` for `s <= t` (and the wrapped
//! kernel for `s > t`), so `e^{+ap}` never appears. On the grid this reduces
//! to one sweep that accumulates the wrap-around contribution and one forward
//! sweep `y_{k+1} = e^{-a h} y_k + I_k`, where the interval integrals `I_k`
//! weight a quadratic interpolant of `b` on each node pair by the exact
//! exponential. For `a -> 0` the weights reduce to Simpson's rule.

use crate::error::{Error, Result};
use crate::periodic::{GridFunction, PeriodicForcing};

/// Below this value of `a p` the factor `1 / (1 - e^{-ap})` is treated as singular.
pub const MIN_DECAY_PRODUCT: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearPeriodicProblem {
    a: f64,
    b: GridFunction,
}

impl LinearPeriodicProblem {
    pub fn new(a: f64, b: GridFunction) -> Result<Self> {
        check_decay(a, b.period())?;
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn forcing(&self) -> &GridFunction {
        &self.b
    }

    pub fn period(&self) -> f64 {
        self.b.period()
    }
}

fn check_decay(a: f64, period: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Domain(format!("decay rate must be positive, got {a}")));
    }
    if a * period < MIN_DECAY_PRODUCT {
        return Err(Error::NearSingular {
            product: a * period,
        });
    }
    Ok(())
}

/// `psi_m(z) = int_0^1 e^{-z(1-w)} w^m dw` for `m = 0, 1, 2`.
fn psi(z: f64) -> [f64; 3] {
    if z <= 1.0 {
        // sum_k (-z)^k m! / (k + m + 1)!
        let mut out = [0.0; 3];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0 / (m + 1) as f64;
            let mut sum = term;
            for k in 1..40 {
                term *= -z / (k + m + 1) as f64;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *slot = sum;
        }
        out
    } else {
        let p0 = -(-z).exp_m1() / z;
        let p1 = (1.0 - p0) / z;
        let p2 = (1.0 - 2.0 * p1) / z;
        [p0, p1, p2]
    }
}

/// Weights on `(b(0), b(h), b(2h))` for `int_0^L e^{-a(L-u)} P(u) du`,
/// with `P` the quadratic interpolant through the three nodes.
fn interval_weights(a: f64, h: f64, len: f64) -> [f64; 3] {
    let [p0, p1, p2] = psi(a * len);
    let j0 = len * p0;
    let j1 = len * len * p1;
    let j2 = len * len * len * p2;
    let hh = h * h;
    [
        (j2 - 3.0 * h * j1 + 2.0 * hh * j0) / (2.0 * hh),
        (2.0 * h * j1 - j2) / hh,
        (j2 - h * j1) / (2.0 * hh),
    ]
}

/// Precomputed kernel for a fixed decay rate and grid; reusable across forcings.
#[derive(Debug, Clone)]
pub struct LinearPeriodicSolver {
    a: f64,
    period: f64,
    intervals: usize,
    decay_step: f64,
    decay_pair: f64,
    half_weights: [f64; 3],
    pair_weights: [f64; 3],
    closure: f64,
}

impl LinearPeriodicSolver {
    pub fn new(a: f64, period: f64, intervals: usize) -> Result<Self> {
        check_decay(a, period)?;
        crate::periodic::check_grid(intervals)?;
        let h = period / intervals as f64;
        Ok(Self {
            a,
            period,
            intervals,
            decay_step: (-a * h).exp(),
            decay_pair: (-2.0 * a * h).exp(),
            half_weights: interval_weights(a, h, h),
            pair_weights: interval_weights(a, h, 2.0 * h),
            closure: 1.0 / -(-a * period).exp_m1(),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    fn check(&self, b: &GridFunction) {
        assert!(
            b.intervals() == self.intervals && b.period() == self.period,
            "forcing grid does not match solver grid"
        );
    }

    fn pair_integrals(&self, v: &[f64]) -> Vec<f64> {
        let w = &self.pair_weights;
        (0..self.intervals)
            .step_by(2)
            .map(|j| w[0] * v[j] + w[1] * v[j + 1] + w[2] * v[j + 2])
            .collect()
    }

    fn march(&self, v: &[f64], pair: &[f64], start: f64, out: &mut Vec<f64>) {
        let w = &self.half_weights;
        let mut y = start;
        for (i, j) in (0..self.intervals).step_by(2).enumerate() {
            out.push(self.decay_step * y + w[0] * v[j] + w[1] * v[j + 1] + w[2] * v[j + 2]);
            y = self.decay_pair * y + pair[i];
            out.push(y);
        }
    }

    /// Value at `t = 0` of the periodic solution.
    fn periodic_start(&self, pair: &[f64]) -> f64 {
        let acc = pair.iter().fold(0.0, |s, f| self.decay_pair * s + f);
        acc * self.closure
    }

    pub fn solve(&self, b: &GridFunction) -> GridFunction {
        self.check(b);
        let v = b.values();
        let pair = self.pair_integrals(v);
        let y0 = self.periodic_start(&pair);
        let mut out = Vec::with_capacity(self.intervals + 1);
        out.push(y0);
        self.march(v, &pair, y0, &mut out);
        GridFunction::from_closed(self.period, out)
    }

    /// Forward solution from `y(0) = y_init` over `horizon` periods.
    pub fn decay_to_periodic(&self, b: &GridFunction, y_init: f64, horizon: usize) -> ScalarPath {
        self.check(b);
        let v = b.values();
        let pair = self.pair_integrals(v);
        let periodic_start = self.periodic_start(&pair);
        let mut values = Vec::with_capacity(horizon * self.intervals + 1);
        values.push(y_init);
        for _ in 0..horizon {
            let start = *values.last().unwrap();
            self.march(v, &pair, start, &mut values);
        }
        let h = self.period / self.intervals as f64;
        ScalarPath {
            times: (0..values.len()).map(|k| k as f64 * h).collect(),
            values,
            intervals: self.intervals,
            periodic_start,
        }
    }
}

/// Scalar solution path sampled on the periodic grid, extended over several periods.
#[derive(Debug, Clone)]
pub struct ScalarPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    intervals: usize,
    /// `y(0)` of the periodic solution this path decays to.
    pub periodic_start: f64,
}

impl ScalarPath {
    /// `|y(kp) - y_periodic(0)|`.
    pub fn gap_at_period(&self, k: usize) -> f64 {
        (self.values[k * self.intervals] - self.periodic_start).abs()
    }

    pub fn periods(&self) -> usize {
        (self.values.len() - 1) / self.intervals
    }
}

/// The unique periodic solution of `y' + a y = b`.
pub fn solve_linear_periodic(problem: &LinearPeriodicProblem) -> Result<GridFunction> {
    let b = problem.forcing();
    let solver = LinearPeriodicSolver::new(problem.a(), b.period(), b.intervals())?;
    Ok(solver.solve(b))
}

pub fn decay_to_periodic(
    problem: &LinearPeriodicProblem,
    y_init: f64,
    horizon: usize,
) -> Result<ScalarPath> {
    let b = problem.forcing();
    let solver = LinearPeriodicSolver::new(problem.a(), b.period(), b.intervals())?;
    Ok(solver.decay_to_periodic(b, y_init, horizon))
}

/// Default residual tolerance `1e-8 (1 + max|b|)`.
pub fn default_residual_tolerance(b: &GridFunction) -> f64 {
    1e-8 * (1.0 + b.sup_norm())
}

/// Sup-norm of `y' + a y - b` with `y'` from fourth-order differences.
pub fn linear_residual(a: f64, b: &GridFunction, y: &GridFunction) -> f64 {
    let dy = y.derivative();
    dy.values()
        .iter()
        .zip(y.values())
        .zip(b.values())
        .fold(0.0_f64, |m, ((d, y), b)| m.max((d + a * y - b).abs()))
}

/// `sup_t |a y_a(t) - mean(b)|` for each decay rate.
pub fn scaled_small_a_limit(
    b: &PeriodicForcing,
    rates: &[f64],
    intervals: usize,
) -> Result<Vec<f64>> {
    let grid = b.sample(intervals)?;
    let mean = grid.mean();
    rates
        .iter()
        .map(|&a| {
            let y = solve_linear_periodic(&LinearPeriodicProblem::new(a, grid.clone())?)?;
            Ok(y.values().iter().fold(0.0_f64, |m, v| m.max((a * v - mean).abs())))
        })
        .collect()
}
