//! Initial-value integration and empirical attraction checks.

use crate::cell_model::ModelParams;
use crate::error::{Error, Result};
use crate::monotone::CooperativeSystem;
use crate::periodic::GridFunction;

/// Integration stops before `y` drops to this level.
pub const DEFAULT_Y_FLOOR: f64 = 1e-9;

/// Default steps per period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;

pub const DEFAULT_ATTRACTION_TOL: f64 = 1e-4;

/// Distances below `tolerance * RESOLUTION_FRACTION` are treated as converged
/// when judging ratios: there they only reflect the accuracy of the reference
/// periodic solution, and ratios hover around one.
pub const RESOLUTION_FRACTION: f64 = 1e-3;

/// Uniformly sampled solution `(t, x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub step: f64,
    pub method: &'static str,
    pub period: f64,
    pub steps_per_period: usize,
}

impl Trajectory {
    pub fn periods(&self) -> usize {
        (self.states.len() - 1) / self.steps_per_period
    }

    /// State at `t = k p`.
    pub fn at_period(&self, k: usize) -> [f64; 2] {
        self.states[k * self.steps_per_period]
    }

    pub fn last(&self) -> [f64; 2] {
        *self.states.last().expect("trajectory has at least one state")
    }

    /// `|x((k+1)p) - x(kp)| + |y((k+1)p) - y(kp)|` for every whole period.
    pub fn period_map_displacements(&self) -> Vec<f64> {
        (0..self.periods())
            .map(|k| {
                let a = self.at_period(k);
                let b = self.at_period(k + 1);
                (b[0] - a[0]).abs() + (b[1] - a[1]).abs()
            })
            .collect()
    }
}

fn steps_per_period(period: f64, step: f64) -> Result<usize> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    let exact = period / step;
    let count = exact.round();
    if (exact - count).abs() > 1e-9 * exact {
        return Err(Error::Config(format!(
            "step {step} does not divide the period {period}"
        )));
    }
    if count < 100.0 {
        return Err(Error::Config(format!(
            "step {step} exceeds period / 100 = {}",
            period / 100.0
        )));
    }
    Ok(count as usize)
}

/// Classical fourth-order Runge-Kutta with a fixed step.
pub fn integrate_system<S: CooperativeSystem + ?Sized>(
    sys: &S,
    x0: f64,
    y0: f64,
    step: f64,
    horizon_periods: usize,
    y_floor: f64,
) -> Result<Trajectory> {
    let period = sys.period();
    let per = steps_per_period(period, step)?;
    if !(y0 > y_floor) {
        return Err(Error::Domain(format!(
            "initial water volume must exceed {y_floor}, got {y0}"
        )));
    }
    let h = period / per as f64;
    let total = per * horizon_periods;
    let mut times = Vec::with_capacity(total + 1);
    let mut states = Vec::with_capacity(total + 1);
    times.push(0.0);
    states.push([x0, y0]);
    let (mut x, mut y) = (x0, y0);
    let eval = |t: f64, x: f64, y: f64, safe: (f64, f64, f64)| {
        if y <= y_floor {
            return Err(Error::SingularityApproached {
                t: safe.0,
                x: safe.1,
                y: safe.2,
            });
        }
        sys.rhs(t, x, y)
    };
    for k in 0..total {
        let t = k as f64 * h;
        let safe = (t, x, y);
        let k1 = eval(t, x, y, safe)?;
        let k2 = eval(t + 0.5 * h, x + 0.5 * h * k1.0, y + 0.5 * h * k1.1, safe)?;
        let k3 = eval(t + 0.5 * h, x + 0.5 * h * k2.0, y + 0.5 * h * k2.1, safe)?;
        let k4 = eval(t + h, x + h * k3.0, y + h * k3.1, safe)?;
        x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        y += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(y > y_floor) || !x.is_finite() {
            return Err(Error::SingularityApproached {
                t: safe.0,
                x: safe.1,
                y: safe.2,
            });
        }
        times.push((k + 1) as f64 * h);
        states.push([x, y]);
    }
    Ok(Trajectory {
        times,
        states,
        step: h,
        method: "rk4",
        period,
        steps_per_period: per,
    })
}

/// Integrates the cell-volume system from `(x0, y0)` at `t = 0`.
pub fn integrate(
    params: &ModelParams,
    x0: f64,
    y0: f64,
    step: f64,
    horizon_periods: usize,
) -> Result<Trajectory> {
    integrate_system(params, x0, y0, step, horizon_periods, DEFAULT_Y_FLOOR)
}

/// Per-period distances from a trajectory to a periodic solution.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    /// `d_k` for windows `k = 1..=K`, stored at index `k - 1`.
    pub distances: Vec<f64>,
    /// `d_{k+1} / d_k`.
    pub ratios: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl AttractionReport {
    pub fn final_distance(&self) -> f64 {
        *self.distances.last().expect("at least one window")
    }
}

/// `d_k = sup |x - x*| + sup |y - y*|` over window `[(k-1)p, kp]`.
///
/// The periodic solution is interpolated (four-point, periodic) at the
/// trajectory sample times. Passes when the last distance is within
/// `tolerance` and each of the last three ratios is below one or ends at a
/// distance under the resolution floor (see [`RESOLUTION_FRACTION`]).
pub fn attraction_metrics(
    traj: &Trajectory,
    periodic_x: &GridFunction,
    periodic_y: &GridFunction,
    tolerance: f64,
) -> Result<AttractionReport> {
    let windows = traj.periods();
    if windows < 4 {
        return Err(Error::Config(format!(
            "attraction metrics need at least 4 periods, trajectory spans {windows}"
        )));
    }
    let per = traj.steps_per_period;
    let distances: Vec<f64> = (1..=windows)
        .map(|k| {
            let mut dx: f64 = 0.0;
            let mut dy: f64 = 0.0;
            for i in (k - 1) * per..=k * per {
                let t = traj.times[i];
                let [x, y] = traj.states[i];
                dx = dx.max((x - periodic_x.interpolate_cubic(t)).abs());
                dy = dy.max((y - periodic_y.interpolate_cubic(t)).abs());
            }
            dx + dy
        })
        .collect();
    let ratios: Vec<f64> = distances.windows(2).map(|w| w[1] / w[0]).collect();
    let floor = tolerance * RESOLUTION_FRACTION;
    let passed = *distances.last().unwrap() <= tolerance
        && ratios
            .iter()
            .zip(&distances[1..])
            .rev()
            .take(3)
            .all(|(&r, &d)| r < 1.0 || d <= floor);
    Ok(AttractionReport {
        distances,
        ratios,
        tolerance,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_validation() {
        let p = ModelParams::demo();
        assert!(integrate(&p, 1.0, 0.4, 0.02, 1).is_err());
        assert!(integrate(&p, 1.0, 0.4, 0.003, 1).is_err());
        assert!(integrate(&p, 1.0, 0.4, 0.01, 1).is_ok());
        assert!(integrate(&p, 1.0, 0.0, 0.01, 1).is_err());
    }

    #[test]
    fn equilibrium_is_constant() {
        let p = ModelParams::autonomous(1.0, 2.0, 2.0, 2.0, 1.0, 0.2).unwrap();
        let traj = integrate(&p, 0.2, 0.2, 1.0 / 200.0, 5).unwrap();
        for s in &traj.states {
            assert!((s[0] - 0.2).abs() < 1e-13 && (s[1] - 0.2).abs() < 1e-13);
        }
        assert_eq!(traj.periods(), 5);
        assert_eq!(traj.times.len(), 1001);
        assert_eq!(traj.method, "rk4");
    }

    #[test]
    fn singularity_reported_with_last_safe_state() {
        // y' = -gamma with no restoring flux pushes y through zero
        struct Draining;
        impl CooperativeSystem for Draining {
            fn period(&self) -> f64 {
                1.0
            }
            fn rhs(&self, _t: f64, _x: f64, y: f64) -> Result<(f64, f64)> {
                if y <= 0.0 {
                    return Err(Error::Domain("y".into()));
                }
                Ok((0.0, -1.0))
            }
            fn jacobian(&self, _t: f64, _x: f64, _y: f64) -> Result<crate::monotone::Jacobian> {
                unreachable!()
            }
        }
        match integrate_system(&Draining, 1.0, 0.5, 0.01, 2, DEFAULT_Y_FLOOR) {
            Err(Error::SingularityApproached { t, y, .. }) => {
                assert!(y > 0.0 && y < 0.011);
                assert!((t - 0.49).abs() < 0.011);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn metrics_need_four_periods() {
        let p = ModelParams::autonomous(1.0, 2.0, 2.0, 2.0, 1.0, 0.2).unwrap();
        let traj = integrate(&p, 0.3, 0.3, 0.01, 3).unwrap();
        let c = GridFunction::constant(1.0, 16, 0.2);
        assert!(attraction_metrics(&traj, &c, &c, 1e-4).is_err());
    }

    #[test]
    fn metrics_on_constant_solution() {
        let p = ModelParams::autonomous(1.0, 2.0, 2.0, 2.0, 1.0, 0.2).unwrap();
        let c = GridFunction::constant(1.0, 16, 0.2);
        let on = integrate(&p, 0.2, 0.2, 0.01, 6).unwrap();
        let report = attraction_metrics(&on, &c, &c, 1e-4).unwrap();
        assert!(report.distances.iter().all(|&d| d <= 1e-12));

        let off = integrate(&p, 0.5, 0.3, 0.01, 8).unwrap();
        let report = attraction_metrics(&off, &c, &c, 1e-4).unwrap();
        assert_eq!(report.distances.len(), 8);
        assert_eq!(report.ratios.len(), 7);
        assert!(report.passed, "{report:?}");
        let displacements = off.period_map_displacements();
        assert_eq!(displacements.len(), 8);
        assert!(displacements[7] < displacements[0]);
    }

    fn synthetic(distances: Vec<f64>, tolerance: f64) -> bool {
        // x equals d_k inside window k and zero on the shared window boundaries
        let per = 100;
        let windows = distances.len();
        let mut times = Vec::new();
        let mut states = Vec::new();
        for i in 0..=windows * per {
            let x = if i % per == 0 { 0.0 } else { distances[i / per] };
            times.push(i as f64 / per as f64);
            states.push([x, 0.0]);
        }
        let traj = Trajectory {
            times,
            states,
            step: 0.01,
            method: "rk4",
            period: 1.0,
            steps_per_period: per,
        };
        let zero = GridFunction::constant(1.0, 16, 0.0);
        let report = attraction_metrics(&traj, &zero, &zero, tolerance).unwrap();
        for (a, b) in report.distances.iter().zip(&distances) {
            assert!((a - b).abs() < 1e-15);
        }
        report.passed
    }

    #[test]
    fn verdict_rules() {
        assert!(synthetic(vec![1.0, 0.5, 0.1, 0.01, 1e-5], 1e-4));
        // too far at the end
        assert!(!synthetic(vec![1.0, 0.5, 0.1, 0.01, 1e-3], 1e-4));
        // small but growing
        assert!(!synthetic(vec![1.0, 1e-6, 2e-6, 3e-6, 5e-6], 1e-4));
        // stalled at the resolution floor
        assert!(synthetic(vec![1.0, 1e-3, 9e-10, 9.1e-10, 9.2e-10], 1e-4));
    }
}
