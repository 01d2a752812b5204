//! Continuous periodic functions and their discretization on a uniform closed grid.
//!
//! Every computed periodic function lives on the nodes `t_k = k p / N`,
//! `k = 0..=N`, with `N` even so that composite Simpson applies. Keeping all
//! functions on one shared grid means pointwise arithmetic never resamples.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default grid resolution shared by all modules.
pub const DEFAULT_GRID: usize = 2048;

const MIN_GRID: usize = 4;

/// Analytic or tabulated description of a periodic scalar function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(omega t + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `offset + amplitude * cos^2(omega t + phase)`
    RaisedCosSquared {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `sum_k cos[k] cos(2 pi k t / p) + sin[k] sin(2 pi k t / p)`, `k = 0, 1, ...`.
    /// `cos[0]` is the constant term; `sin[0]` is ignored.
    Harmonic { cos: Vec<f64>, sin: Vec<f64> },
    /// `N + 1` samples on a uniform grid over `[0, p]`, linearly interpolated.
    Table { values: Vec<f64> },
}

/// A continuous `p`-periodic function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicForcing {
    period: f64,
    spec: ForcingSpec,
}

impl PeriodicForcing {
    pub fn new(period: f64, spec: ForcingSpec) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        match &spec {
            ForcingSpec::Constant { value } => check_finite(&[*value])?,
            ForcingSpec::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            }
            | ForcingSpec::RaisedCosSquared {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                check_finite(&[*offset, *amplitude, *omega, *phase])?;
                // cos^2 has half the period of cos, so omega*p only needs to be a
                // multiple of pi there.
                let unit = match spec {
                    ForcingSpec::Sinusoid { .. } => TAU,
                    _ => std::f64::consts::PI,
                };
                let turns = omega * period / unit;
                if (turns - turns.round()).abs() > 1e-9 * turns.abs().max(1.0) {
                    return Err(Error::Config(format!(
                        "angular frequency {omega} is not commensurate with period {period}"
                    )));
                }
            }
            ForcingSpec::Harmonic { cos, sin } => {
                check_finite(cos)?;
                check_finite(sin)?;
            }
            ForcingSpec::Table { values } => {
                if values.len() < 3 {
                    return Err(Error::Config("table forcing needs at least 3 samples".into()));
                }
                check_finite(values)?;
                let first = values[0];
                let last = values[values.len() - 1];
                let scale = first.abs().max(last.abs());
                if (first - last).abs() > 1e-12 * scale {
                    return Err(Error::Config(format!(
                        "table forcing is not periodic: first sample {first}, last sample {last}"
                    )));
                }
            }
        }
        Ok(Self { period, spec })
    }

    pub fn constant(period: f64, value: f64) -> Result<Self> {
        Self::new(period, ForcingSpec::Constant { value })
    }

    /// `offset + amplitude * sin(2 pi cycles t / p)`.
    pub fn sinusoid(period: f64, offset: f64, amplitude: f64, cycles: u32) -> Result<Self> {
        Self::new(
            period,
            ForcingSpec::Sinusoid {
                offset,
                amplitude,
                omega: TAU * f64::from(cycles) / period,
                phase: 0.0,
            },
        )
    }

    /// `offset + amplitude * cos^2(2 pi cycles t / p)`.
    pub fn raised_cos_squared(period: f64, offset: f64, amplitude: f64, cycles: u32) -> Result<Self> {
        Self::new(
            period,
            ForcingSpec::RaisedCosSquared {
                offset,
                amplitude,
                omega: TAU * f64::from(cycles) / period,
                phase: 0.0,
            },
        )
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spec(&self) -> &ForcingSpec {
        &self.spec
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.spec {
            ForcingSpec::Constant { value } => *value,
            ForcingSpec::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * t + phase).sin(),
            ForcingSpec::RaisedCosSquared {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                let c = (omega * t + phase).cos();
                offset + amplitude * c * c
            }
            ForcingSpec::Harmonic { cos, sin } => {
                let base = TAU * t / self.period;
                let mut acc = cos.first().copied().unwrap_or(0.0);
                for k in 1..cos.len().max(sin.len()) {
                    let arg = base * k as f64;
                    acc += cos.get(k).copied().unwrap_or(0.0) * arg.cos()
                        + sin.get(k).copied().unwrap_or(0.0) * arg.sin();
                }
                acc
            }
            ForcingSpec::Table { values } => {
                let intervals = values.len() - 1;
                let phase = t.rem_euclid(self.period) / self.period * intervals as f64;
                let k = (phase.floor() as usize).min(intervals - 1);
                let w = phase - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    /// Grid values `f(k p / N)`. Tables with a different native resolution are
    /// linearly interpolated, which limits accuracy to second order.
    pub fn sample(&self, n: usize) -> Result<GridFunction> {
        check_grid(n)?;
        if let ForcingSpec::Table { values } = &self.spec {
            if values.len() == n + 1 {
                return GridFunction::new(self.period, values.clone());
            }
        }
        Ok(GridFunction::from_fn(self.period, n, |t| self.eval(t)))
    }

    /// Splits `f = mean + tilde` with `tilde` integrating to zero over a period.
    pub fn mean_decompose(&self, n: usize) -> Result<(f64, GridFunction)> {
        Ok(self.sample(n)?.mean_decompose())
    }

    /// True for the analytic kinds; tables are only piecewise linear.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.spec, ForcingSpec::Table { .. })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Config("forcing parameters must be finite".into()))
    }
}

pub(crate) fn check_grid(n: usize) -> Result<()> {
    if n < MIN_GRID || n % 2 != 0 {
        Err(Error::Config(format!(
            "grid size must be even and at least {MIN_GRID}, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// Values of a periodic function at `N + 1` uniform nodes closing `[0, p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    period: f64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(period: f64, values: Vec<f64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        check_grid(values.len().saturating_sub(1))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid function has non-finite values".into()));
        }
        let first = values[0];
        let last = values[values.len() - 1];
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if (first - last).abs() > 1e-10 * scale {
            return Err(Error::Domain(format!(
                "grid function endpoints differ: {first} vs {last}"
            )));
        }
        Ok(Self { period, values })
    }

    /// Builds from a closure evaluated at every node.
    pub fn from_fn(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = period / n as f64;
        let values = (0..=n).map(|k| f(k as f64 * h)).collect();
        Self { period, values }
    }

    pub fn constant(period: f64, n: usize, value: f64) -> Self {
        Self {
            period,
            values: vec![value; n + 1],
        }
    }

    /// Internal constructor for computed periodic data; forces exact closure.
    pub(crate) fn from_closed(period: f64, mut values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        values[n] = values[0];
        Self { period, values }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.period / self.intervals() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.values.len() == other.values.len() && self.period == other.period
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            period: self.period,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert!(self.same_grid(other), "grid functions on different grids");
        GridFunction {
            period: self.period,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        self.map(|v| v * factor)
    }

    pub fn shift(&self, offset: f64) -> GridFunction {
        self.map(|v| v + offset)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        assert!(self.same_grid(other), "grid functions on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Composite Simpson approximation of the integral over one period.
    pub fn integrate_period(&self) -> f64 {
        let v = &self.values;
        let n = self.intervals();
        let mut odd = 0.0;
        let mut even = 0.0;
        for k in 1..n {
            if k % 2 == 1 {
                odd += v[k];
            } else {
                even += v[k];
            }
        }
        self.step() / 3.0 * (v[0] + v[n] + 4.0 * odd + 2.0 * even)
    }

    pub fn mean(&self) -> f64 {
        self.integrate_period() / self.period
    }

    pub fn mean_decompose(&self) -> (f64, GridFunction) {
        let mean = self.mean();
        (mean, self.shift(-mean))
    }

    /// Fourth-order central difference with periodic wrap-around.
    pub fn derivative(&self) -> GridFunction {
        let n = self.intervals();
        let h = self.step();
        let v = &self.values;
        let at = |k: isize| v[k.rem_euclid(n as isize) as usize];
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..n as isize {
            out.push((at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h));
        }
        out.push(out[0]);
        GridFunction {
            period: self.period,
            values: out,
        }
    }

    /// Periodic linear interpolation at an arbitrary time.
    pub fn interpolate_linear(&self, t: f64) -> f64 {
        let n = self.intervals();
        let s = t.rem_euclid(self.period) / self.step();
        let k = (s.floor() as usize).min(n - 1);
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Periodic four-point (cubic Lagrange) interpolation at an arbitrary time.
    pub fn interpolate_cubic(&self, t: f64) -> f64 {
        let n = self.intervals() as isize;
        let s = t.rem_euclid(self.period) / self.step();
        let k = (s.floor() as isize).min(n - 1);
        let w = s - k as f64;
        let at = |j: isize| self.values[j.rem_euclid(n) as usize];
        let (p0, p1, p2, p3) = (at(k - 1), at(k), at(k + 1), at(k + 2));
        let l0 = -w * (w - 1.0) * (w - 2.0) / 6.0;
        let l1 = (w + 1.0) * (w - 1.0) * (w - 2.0) / 2.0;
        let l2 = -(w + 1.0) * w * (w - 2.0) / 2.0;
        let l3 = (w + 1.0) * w * (w - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }
}

/// Default tolerance on the mean of a forcing handed to [`zero_mean_primitive`].
pub fn default_mean_tolerance(tilde: &GridFunction) -> f64 {
    1e-8 * tilde.period() * tilde.sup_norm()
}

/// Periodic solution `Y` of `Y' = tilde`, normalized to zero mean.
///
/// Node pairs are integrated with Simpson's rule and odd nodes with the
/// matching quadratic half-interval rule.
pub fn zero_mean_primitive(tilde: &GridFunction) -> Result<GridFunction> {
    zero_mean_primitive_with_tolerance(tilde, default_mean_tolerance(tilde))
}

pub fn zero_mean_primitive_with_tolerance(
    tilde: &GridFunction,
    tolerance: f64,
) -> Result<GridFunction> {
    let integral = tilde.integrate_period();
    if integral.abs() > tolerance {
        return Err(Error::PeriodicityViolation {
            mean: integral / tilde.period(),
            tolerance,
        });
    }
    // drop the roundoff-level mean so the primitive closes exactly
    let b = tilde.shift(-integral / tilde.period());
    let v = b.values();
    let n = b.intervals();
    let h = b.step();
    let mut y = vec![0.0; n + 1];
    for j in (0..n).step_by(2) {
        let (b0, b1, b2) = (v[j], v[j + 1], v[j + 2]);
        y[j + 1] = y[j] + h / 12.0 * (5.0 * b0 + 8.0 * b1 - b2);
        y[j + 2] = y[j] + h / 3.0 * (b0 + 4.0 * b1 + b2);
    }
    let primitive = GridFunction::from_closed(b.period(), y);
    let mean = primitive.mean();
    Ok(primitive.shift(-mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_examples() {
        let c = PeriodicForcing::constant(1.0, 2.0).unwrap();
        assert_eq!(c.sample(4).unwrap().values(), &[2.0; 5]);

        let s = PeriodicForcing::sinusoid(1.0, 2.0, 1.0, 1).unwrap();
        let expected = [2.0, 3.0, 2.0, 1.0, 2.0];
        for (v, e) in s.sample(4).unwrap().values().iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }

        let r = PeriodicForcing::raised_cos_squared(1.0, 1.0, 1.0, 1).unwrap();
        let expected = [2.0, 1.0, 2.0, 1.0, 2.0];
        for (v, e) in r.sample(4).unwrap().values().iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn bad_grid_sizes() {
        let c = PeriodicForcing::constant(1.0, 2.0).unwrap();
        assert!(matches!(c.sample(5), Err(Error::Config(_))));
        assert!(matches!(c.sample(2), Err(Error::Config(_))));
        assert!(c.sample(4).is_ok());
    }

    #[test]
    fn construction_checks() {
        assert!(PeriodicForcing::constant(0.0, 1.0).is_err());
        assert!(PeriodicForcing::new(
            1.0,
            ForcingSpec::Sinusoid {
                offset: 1.0,
                amplitude: 1.0,
                omega: 1.0,
                phase: 0.0
            }
        )
        .is_err());
        assert!(PeriodicForcing::new(
            1.0,
            ForcingSpec::Table {
                values: vec![1.0, 2.0, 1.5]
            }
        )
        .is_err());
        assert!(PeriodicForcing::new(
            2.0,
            ForcingSpec::Table {
                values: vec![1.0, 2.0, 1.0]
            }
        )
        .is_ok());
        // cos^2(pi t) repeats with period 1
        assert!(PeriodicForcing::new(
            1.0,
            ForcingSpec::RaisedCosSquared {
                offset: 1.0,
                amplitude: 1.0,
                omega: std::f64::consts::PI,
                phase: 0.0
            }
        )
        .is_ok());
    }

    #[test]
    fn grid_function_rejects_open_endpoints() {
        assert!(GridFunction::new(1.0, vec![1.0, 2.0, 3.0, 2.0, 1.5]).is_err());
        assert!(GridFunction::new(1.0, vec![1.0, 2.0, 3.0, 2.0, 1.0]).is_ok());
        assert!(GridFunction::new(1.0, vec![1.0, 2.0, 3.0, 1.0]).is_err());
    }

    #[test]
    fn integrate_examples() {
        let three = GridFunction::constant(2.0, 8, 3.0);
        assert_abs_diff_eq!(three.integrate_period(), 6.0, epsilon = 1e-14);

        let sine = GridFunction::from_fn(1.0, 64, |t| (TAU * t).sin());
        assert!(sine.integrate_period().abs() < 1e-12);

        let cos2 = GridFunction::from_fn(1.0, 64, |t| (TAU * t).cos().powi(2));
        assert_abs_diff_eq!(cos2.integrate_period(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn cos_squared_integral_matches_riemann_sum() {
        // independent oracle: midpoint Riemann sum at 1e6 points
        let m = 1_000_000;
        let riemann: f64 = (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) / m as f64;
                (TAU * t).cos().powi(2)
            })
            .sum::<f64>()
            / m as f64;
        let g = GridFunction::from_fn(1.0, DEFAULT_GRID, |t| (TAU * t).cos().powi(2));
        assert_abs_diff_eq!(g.integrate_period(), riemann, epsilon = 1e-10);
    }

    #[test]
    fn mean_decompose_examples() {
        let s = PeriodicForcing::sinusoid(1.0, 2.0, 1.0, 1).unwrap();
        let (mean, tilde) = s.mean_decompose(256).unwrap();
        assert_abs_diff_eq!(mean, 2.0, epsilon = 1e-12);
        for k in 0..=256 {
            assert_abs_diff_eq!(tilde.values()[k], (TAU * tilde.time(k)).sin(), epsilon = 1e-12);
        }

        let c = PeriodicForcing::constant(3.0, 0.7).unwrap();
        let (mean, tilde) = c.mean_decompose(16).unwrap();
        assert_abs_diff_eq!(mean, 0.7, epsilon = 1e-15);
        assert!(tilde.sup_norm() < 1e-15);

        let r = PeriodicForcing::raised_cos_squared(1.0, 1.0, 1.0, 1).unwrap();
        let (mean, tilde) = r.mean_decompose(256).unwrap();
        assert_abs_diff_eq!(mean, 1.5, epsilon = 1e-12);
        assert!(tilde.integrate_period().abs() < 1e-10);
        for k in 0..=256 {
            let t = tilde.time(k);
            assert_abs_diff_eq!(tilde.values()[k], (2.0 * TAU * t).cos() / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn primitive_of_sine() {
        let tilde = GridFunction::from_fn(1.0, DEFAULT_GRID, |t| (TAU * t).sin());
        let y = zero_mean_primitive(&tilde).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=DEFAULT_GRID {
            let exact = -(TAU * y.time(k)).cos() / TAU;
            worst = worst.max((y.values()[k] - exact).abs());
        }
        assert!(worst < 1e-8, "worst {worst}");
        // differentiating back recovers the forcing
        assert!(y.derivative().sup_distance(&tilde) < 1e-8);
    }

    #[test]
    fn primitive_of_zero_and_of_nonzero_mean() {
        let zero = GridFunction::constant(1.0, 16, 0.0);
        assert_eq!(zero_mean_primitive(&zero).unwrap().sup_norm(), 0.0);

        let one = GridFunction::constant(1.0, 16, 1.0);
        assert!(matches!(
            zero_mean_primitive(&one),
            Err(Error::PeriodicityViolation { .. })
        ));
    }

    #[test]
    fn table_interpolation() {
        let t = PeriodicForcing::new(
            1.0,
            ForcingSpec::Table {
                values: vec![1.0, 3.0, 1.0],
            },
        )
        .unwrap();
        assert_abs_diff_eq!(t.eval(0.25), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.eval(1.25), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.eval(-0.25), 2.0, epsilon = 1e-15);
        let g = t.sample(4).unwrap();
        assert_eq!(g.values(), &[1.0, 2.0, 3.0, 2.0, 1.0]);
        assert!(!t.is_smooth());
    }

    #[test]
    fn harmonic_eval() {
        let h = PeriodicForcing::new(
            2.0,
            ForcingSpec::Harmonic {
                cos: vec![1.0, 0.5],
                sin: vec![0.0, 0.0, 0.25],
            },
        )
        .unwrap();
        let t: f64 = 0.3;
        let expected = 1.0 + 0.5 * (TAU * t / 2.0).cos() + 0.25 * (2.0 * TAU * t / 2.0).sin();
        assert_abs_diff_eq!(h.eval(t), expected, epsilon = 1e-15);
        let (mean, _) = h.mean_decompose(64).unwrap();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn interpolation_accuracy() {
        let g = GridFunction::from_fn(1.0, 256, |t| (TAU * t).sin());
        let t = 0.123_456;
        let exact = (TAU * t).sin();
        assert!((g.interpolate_linear(t) - exact).abs() < 1e-4);
        assert!((g.interpolate_cubic(t) - exact).abs() < 1e-8);
        assert_abs_diff_eq!(g.interpolate_cubic(t + 3.0), g.interpolate_cubic(t), epsilon = 1e-12);
    }
}
