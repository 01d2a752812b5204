//! Monotone iteration for periodic solutions of cooperative planar systems.
//!
//! Starting from an ordered sub/supersolution envelope, each step solves the
//! linear periodic problems
//!
//! ```text
//! x_n' + M x_n = M x_{n-1} + f(t, x_{n-1}, y_{n-1})
//! y_n' + M y_n = M y_{n-1} + g(t, x_{n-1}, y_{n-1})
//! ```
//!
//! The ascending sequence (from the subsolution) and the descending sequence
//! (from the supersolution) squeeze toward the minimal and maximal periodic
//! solutions. `M` must make `M x + f` and `M y + g` nondecreasing in their
//! own variable on the current order interval. Because the order intervals are
//! nested, `M` may be re-estimated on the shrinking box as iteration proceeds.

use crate::error::{Error, Result};
use crate::linear::LinearPeriodicSolver;
use crate::periodic::GridFunction;

/// Partial derivatives of the right-hand side at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_y: f64,
}

/// `x' = f(t, x, y)`, `y' = g(t, x, y)` with `f`, `g` periodic in `t`.
pub trait CooperativeSystem: Sync {
    fn period(&self) -> f64;

    /// `(f, g)` at `(t, x, y)`.
    fn rhs(&self, t: f64, x: f64, y: f64) -> Result<(f64, f64)>;

    fn jacobian(&self, t: f64, x: f64, y: f64) -> Result<Jacobian>;
}

/// A pair of periodic grid functions together with their derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicPair {
    pub x: GridFunction,
    pub y: GridFunction,
    pub dx: GridFunction,
    pub dy: GridFunction,
}

impl PeriodicPair {
    pub fn new(x: GridFunction, y: GridFunction, dx: GridFunction, dy: GridFunction) -> Result<Self> {
        if !(x.same_grid(&y) && x.same_grid(&dx) && x.same_grid(&dy)) {
            return Err(Error::InvalidEnvelope("pair components live on different grids".into()));
        }
        Ok(Self { x, y, dx, dy })
    }

    pub fn constant(period: f64, intervals: usize, x: f64, y: f64) -> Self {
        let zero = GridFunction::constant(period, intervals, 0.0);
        Self {
            x: GridFunction::constant(period, intervals, x),
            y: GridFunction::constant(period, intervals, y),
            dx: zero.clone(),
            dy: zero,
        }
    }

    /// Pair whose derivatives come from fourth-order periodic differences.
    pub fn with_numeric_derivatives(x: GridFunction, y: GridFunction) -> Result<Self> {
        let dx = x.derivative();
        let dy = y.derivative();
        Self::new(x, y, dx, dy)
    }

    pub fn period(&self) -> f64 {
        self.x.period()
    }

    pub fn intervals(&self) -> usize {
        self.x.intervals()
    }

    /// Largest componentwise sup-distance.
    pub fn distance(&self, other: &PeriodicPair) -> f64 {
        self.x.sup_distance(&other.x).max(self.y.sup_distance(&other.y))
    }

    fn sup_norm(&self) -> f64 {
        self.x.sup_norm().max(self.y.sup_norm())
    }
}

/// Ordered sub- and supersolution pairs bounding the iteration box.
#[derive(Debug, Clone)]
pub struct Envelope {
    sub: PeriodicPair,
    sup: PeriodicPair,
}

impl Envelope {
    pub fn new(sub: PeriodicPair, sup: PeriodicPair) -> Result<Self> {
        if !sub.x.same_grid(&sup.x) {
            return Err(Error::InvalidEnvelope("sub and super pairs on different grids".into()));
        }
        for (name, lo, hi) in [("x", &sub.x, &sup.x), ("y", &sub.y, &sup.y)] {
            if let Some(k) = (0..lo.values().len()).find(|&k| lo.values()[k] >= hi.values()[k]) {
                return Err(Error::InvalidEnvelope(format!(
                    "subsolution {name} = {} not below supersolution {name} = {} at node {k}",
                    lo.values()[k],
                    hi.values()[k]
                )));
            }
        }
        Ok(Self { sub, sup })
    }

    pub fn sub(&self) -> &PeriodicPair {
        &self.sub
    }

    pub fn sup(&self) -> &PeriodicPair {
        &self.sup
    }

    pub fn period(&self) -> f64 {
        self.sub.period()
    }

    pub fn intervals(&self) -> usize {
        self.sub.intervals()
    }
}

/// A point `(t, x, y)` of the sampling lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Visits a `samples x samples` lattice in each node's box `[lo, hi]`,
/// optionally skipping nodes with `stride > 1`.
fn for_each_lattice_point(
    lower: (&GridFunction, &GridFunction),
    upper: (&GridFunction, &GridFunction),
    samples: usize,
    stride: usize,
    mut visit: impl FnMut(LatticePoint) -> Result<()>,
) -> Result<()> {
    let samples = samples.max(2);
    let n = lower.0.intervals();
    let denom = (samples - 1) as f64;
    let mut k = 0;
    loop {
        let t = lower.0.time(k);
        let (x0, x1) = (lower.0.values()[k], upper.0.values()[k]);
        let (y0, y1) = (lower.1.values()[k], upper.1.values()[k]);
        for i in 0..samples {
            let x = x0 + (x1 - x0) * i as f64 / denom;
            for j in 0..samples {
                let y = y0 + (y1 - y0) * j as f64 / denom;
                visit(LatticePoint { t, x, y })?;
            }
        }
        if k == n {
            break;
        }
        k = (k + stride.max(1)).min(n);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CooperativityReport {
    pub passed: bool,
    pub min_f_y: f64,
    pub min_g_x: f64,
    /// Lattice point of the most negative cross derivative when the check fails.
    pub witness: Option<LatticePoint>,
}

/// Checks `f_y >= 0` and `g_x >= 0` on a lattice filling the envelope box.
pub fn verify_cooperative<S: CooperativeSystem + ?Sized>(
    sys: &S,
    env: &Envelope,
    samples: usize,
) -> Result<CooperativityReport> {
    let mut min_f_y = f64::INFINITY;
    let mut min_g_x = f64::INFINITY;
    let mut worst = (f64::INFINITY, None);
    for_each_lattice_point(
        (&env.sub.x, &env.sub.y),
        (&env.sup.x, &env.sup.y),
        samples,
        1,
        |p| {
            let jac = sys.jacobian(p.t, p.x, p.y)?;
            min_f_y = min_f_y.min(jac.f_y);
            min_g_x = min_g_x.min(jac.g_x);
            let cross = jac.f_y.min(jac.g_x);
            if cross < worst.0 {
                worst = (cross, Some(p));
            }
            Ok(())
        },
    )?;
    let passed = min_f_y >= -1e-12 && min_g_x >= -1e-12;
    Ok(CooperativityReport {
        passed,
        min_f_y,
        min_g_x,
        witness: if passed { None } else { worst.1 },
    })
}

/// Outcome of checking the differential inequalities of a sub- or supersolution.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub passed: bool,
    /// Smallest signed margin of the x inequality; positive means strict.
    pub worst_margin_x: f64,
    pub worst_margin_y: f64,
    pub worst_node_x: usize,
    pub worst_node_y: usize,
    pub slack: f64,
}

impl InequalityReport {
    pub fn worst_margin(&self) -> f64 {
        self.worst_margin_x.min(self.worst_margin_y)
    }
}

fn verify_inequalities<S: CooperativeSystem + ?Sized>(
    sys: &S,
    pair: &PeriodicPair,
    sign: f64,
) -> Result<InequalityReport> {
    let mut scale: f64 = 1.0;
    let mut worst_x = (f64::INFINITY, 0);
    let mut worst_y = (f64::INFINITY, 0);
    for k in 0..=pair.intervals() {
        let (f, g) = sys.rhs(pair.x.time(k), pair.x.values()[k], pair.y.values()[k])?;
        let (dx, dy) = (pair.dx.values()[k], pair.dy.values()[k]);
        scale = scale.max(1.0 + f.abs().max(g.abs()).max(dx.abs()).max(dy.abs()));
        let mx = sign * (f - dx);
        let my = sign * (g - dy);
        if mx < worst_x.0 {
            worst_x = (mx, k);
        }
        if my < worst_y.0 {
            worst_y = (my, k);
        }
    }
    let slack = 1e-10 * scale;
    Ok(InequalityReport {
        passed: worst_x.0 >= -slack && worst_y.0 >= -slack,
        worst_margin_x: worst_x.0,
        worst_margin_y: worst_y.0,
        worst_node_x: worst_x.1,
        worst_node_y: worst_y.1,
        slack,
    })
}

/// `x' <= f(t, x, y)` and `y' <= g(t, x, y)` at every node, up to roundoff slack.
pub fn verify_subsolution<S: CooperativeSystem + ?Sized>(
    sys: &S,
    pair: &PeriodicPair,
) -> Result<InequalityReport> {
    verify_inequalities(sys, pair, 1.0)
}

/// `x' >= f(t, x, y)` and `y' >= g(t, x, y)` at every node, up to roundoff slack.
pub fn verify_supersolution<S: CooperativeSystem + ?Sized>(
    sys: &S,
    pair: &PeriodicPair,
) -> Result<InequalityReport> {
    verify_inequalities(sys, pair, -1.0)
}

/// `max(0, -f_x, -g_y)` over the lattice in the box between `lower` and `upper`.
pub fn sample_own_decay<S: CooperativeSystem + ?Sized>(
    sys: &S,
    lower: (&GridFunction, &GridFunction),
    upper: (&GridFunction, &GridFunction),
    samples: usize,
    stride: usize,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for_each_lattice_point(lower, upper, samples, stride, |p| {
        let jac = sys.jacobian(p.t, p.x, p.y)?;
        if !(jac.f_x.is_finite() && jac.g_y.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite derivative at t = {}, x = {}, y = {}",
                p.t, p.x, p.y
            )));
        }
        worst = worst.max(-jac.f_x).max(-jac.g_y);
        Ok(())
    })?;
    Ok(worst)
}

/// Safety margin applied to a sampled bound on `-f_x`, `-g_y`.
pub fn iteration_constant_from_bound(bound: f64) -> f64 {
    1.05 * bound.max(0.0) + 0.01
}

/// Iteration constant making `M x + f` and `M y + g` nondecreasing on the envelope box.
pub fn choose_m<S: CooperativeSystem + ?Sized>(sys: &S, env: &Envelope, samples: usize) -> Result<f64> {
    let bound = sample_own_decay(
        sys,
        (&env.sub.x, &env.sub.y),
        (&env.sup.x, &env.sup.y),
        samples,
        1,
    )?;
    Ok(iteration_constant_from_bound(bound))
}

fn iterate_with<S: CooperativeSystem + ?Sized>(
    sys: &S,
    solver: &LinearPeriodicSolver,
    current: &PeriodicPair,
) -> Result<PeriodicPair> {
    let m = solver.a();
    let n = current.intervals();
    let period = current.period();
    let mut fx = Vec::with_capacity(n + 1);
    let mut fy = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (x, y) = (current.x.values()[k], current.y.values()[k]);
        let (f, g) = sys.rhs(current.x.time(k), x, y)?;
        fx.push(m * x + f);
        fy.push(m * y + g);
    }
    let forcing_x = GridFunction::from_closed(period, fx);
    let forcing_y = GridFunction::from_closed(period, fy);
    let x = solver.solve(&forcing_x);
    let y = solver.solve(&forcing_y);
    // derivative of the linear solution: forcing - M * solution
    let dx = forcing_x.zip_map(&x, |b, v| b - m * v);
    let dy = forcing_y.zip_map(&y, |b, v| b - m * v);
    Ok(PeriodicPair { x, y, dx, dy })
}

/// One step of the monotone scheme with iteration constant `m`.
pub fn iterate_once<S: CooperativeSystem + ?Sized>(
    sys: &S,
    m: f64,
    current: &PeriodicPair,
) -> Result<PeriodicPair> {
    let solver = LinearPeriodicSolver::new(m, current.period(), current.intervals())?;
    iterate_with(sys, &solver, current)
}

/// Adaptive M is frozen once both chains take steps below this fraction of
/// the tolerance scale, with estimated remaining distances below
/// `FREEZE_TAIL` times that.
///
/// The discrete fixed point of a high-order positive scheme moves slightly
/// with M (a difference operator keeping `(D + M)^-1` positive for every M is
/// at most first order). Changing M under a nearly converged chain would push
/// it backwards by that amount. So a chain reaching this step size while M
/// is still adapting pauses, still strictly below (above) the limit, and
/// resumes once M is frozen; both chains then share one discrete fixed point.
/// A frozen M stays admissible because the order interval only shrinks.
pub const FREEZE_STEP: f64 = 1e-6;

/// Multiple of the freeze step allowed for the estimated remaining distance.
const FREEZE_TAIL: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneConfig {
    /// Fixed iteration constant; disables adaptive re-estimation.
    pub m_override: Option<f64>,
    /// Multiplier applied to every sampled iteration constant.
    pub m_scale: f64,
    /// Re-estimate `M` on the shrinking order interval.
    pub adaptive_m: bool,
    /// Iterations between re-estimates of `M`.
    pub refresh_every: usize,
    /// Lattice resolution per axis for the initial choice of `M`.
    pub samples: usize,
    /// Lattice resolution per axis for adaptive re-estimates.
    pub adaptive_samples: usize,
    pub tol_step: f64,
    pub tol_unique: f64,
    pub max_iter: usize,
    /// Ordering violations up to this size are clamped as roundoff.
    pub ordering_tol: f64,
}

impl Default for MonotoneConfig {
    fn default() -> Self {
        Self {
            m_override: None,
            m_scale: 1.0,
            adaptive_m: true,
            refresh_every: 4,
            samples: 33,
            adaptive_samples: 5,
            tol_step: 1e-9,
            tol_unique: 1e-7,
            max_iter: 10_000,
            ordering_tol: 1e-9,
        }
    }
}

/// Sup-norm gaps recorded after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainGap {
    /// Ascending iterate versus its predecessor.
    pub ascending: f64,
    /// Descending iterate versus its predecessor.
    pub descending: f64,
    /// Descending versus ascending iterate.
    pub between: f64,
}

/// State handed to an observer after every iteration.
#[derive(Debug)]
pub struct IterationSnapshot<'a> {
    pub iteration: usize,
    pub m: f64,
    pub ascending: &'a PeriodicPair,
    pub descending: &'a PeriodicPair,
    pub gap: ChainGap,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub minimal: PeriodicPair,
    pub maximal: PeriodicPair,
    pub iterations: usize,
    pub chain_gaps: Vec<ChainGap>,
    pub m_initial: f64,
    /// Iteration constant in effect at the last step.
    pub m_used: f64,
    pub converged: bool,
    /// Scale factor applied to the step and uniqueness tolerances.
    pub scale: f64,
    pub residual_minimal: f64,
    pub residual_maximal: f64,
    pub residual_tolerance: f64,
}

impl IterationReport {
    pub fn final_gap(&self) -> f64 {
        self.minimal.distance(&self.maximal)
    }

    pub fn residuals_ok(&self) -> bool {
        self.residual_minimal <= self.residual_tolerance
            && self.residual_maximal <= self.residual_tolerance
    }
}

/// Sup over nodes of `|x' - f|` and `|y' - g|`, with `x'`, `y'` from
/// fourth-order periodic differences of the grid values.
pub fn fixed_point_residual<S: CooperativeSystem + ?Sized>(
    sys: &S,
    x: &GridFunction,
    y: &GridFunction,
) -> Result<f64> {
    let dx = x.derivative();
    let dy = y.derivative();
    let mut worst: f64 = 0.0;
    for k in 0..=x.intervals() {
        let (f, g) = sys.rhs(x.time(k), x.values()[k], y.values()[k])?;
        worst = worst
            .max((dx.values()[k] - f).abs())
            .max((dy.values()[k] - g).abs());
    }
    Ok(worst)
}

fn rhs_scale<S: CooperativeSystem + ?Sized>(sys: &S, env: &Envelope) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in [&env.sub, &env.sup] {
        for k in 0..=pair.intervals() {
            let (f, g) = sys.rhs(pair.x.time(k), pair.x.values()[k], pair.y.values()[k])?;
            worst = worst.max(f.abs()).max(g.abs());
        }
    }
    Ok(1.0 + worst)
}

const X_LABELS: [&str; 3] = [
    "x: ascending step decreased",
    "x: ascending above descending",
    "x: descending step increased",
];
const Y_LABELS: [&str; 3] = [
    "y: ascending step decreased",
    "y: ascending above descending",
    "y: descending step increased",
];

/// Enforces `lo_prev <= lo <= hi <= hi_prev` for one component. Violations
/// within `tol` are clamped; larger ones are reported.
fn enforce_chain(
    lo_prev: &GridFunction,
    lo: &mut GridFunction,
    hi: &mut GridFunction,
    hi_prev: &GridFunction,
    tol: f64,
    labels: [&'static str; 3],
) -> std::result::Result<(), (usize, &'static str, f64)> {
    let mut lo_v = std::mem::replace(lo, GridFunction::constant(1.0, 4, 0.0)).into_values();
    let mut hi_v = std::mem::replace(hi, GridFunction::constant(1.0, 4, 0.0)).into_values();
    let period = lo_prev.period();
    let mut outcome = Ok(());
    for k in 0..lo_v.len() {
        let checks = [
            (lo_prev.values()[k] - lo_v[k], labels[0]),
            (lo_v[k] - hi_v[k], labels[1]),
            (hi_v[k] - hi_prev.values()[k], labels[2]),
        ];
        if let Some(&(v, which)) = checks.iter().find(|(v, _)| *v > tol) {
            outcome = Err((k, which, v));
            break;
        }
        lo_v[k] = lo_v[k].max(lo_prev.values()[k]);
        hi_v[k] = hi_v[k].min(hi_prev.values()[k]);
        if lo_v[k] > hi_v[k] {
            let mid = 0.5 * (lo_v[k] + hi_v[k]);
            lo_v[k] = mid;
            hi_v[k] = mid;
        }
    }
    *lo = GridFunction::from_closed(period, lo_v);
    *hi = GridFunction::from_closed(period, hi_v);
    outcome
}

/// Keeps `u' + M u` equal to the forcing at nodes moved by clamping.
fn resync_derivatives(before: &PeriodicPair, after: &mut PeriodicPair, m: f64) {
    let fix = |d: &GridFunction, old: &GridFunction, new: &GridFunction| {
        let shift = new.sub(old);
        d.zip_map(&shift, |dv, s| dv - m * s)
    };
    if after.x != before.x {
        after.dx = fix(&after.dx, &before.x, &after.x);
    }
    if after.y != before.y {
        after.dy = fix(&after.dy, &before.y, &after.y);
    }
}

/// Distance still to travel under linear convergence with the observed ratio.
fn remaining_distance(gap: f64, previous: f64) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    let ratio = gap / previous;
    if ratio < 1.0 {
        gap * ratio / (1.0 - ratio)
    } else {
        f64::INFINITY
    }
}

/// Runs both monotone sequences to their limits.
///
/// Stops once both consecutive-step gaps are below `tol_step` and the
/// geometric tail estimated from the last two gaps is too. The result is
/// flagged converged when the two limits agree within `tol_unique`.
pub fn run_monotone<S: CooperativeSystem + ?Sized>(
    sys: &S,
    env: &Envelope,
    cfg: &MonotoneConfig,
) -> Result<IterationReport> {
    run_monotone_observed(sys, env, cfg, |_| {})
}

/// As [`run_monotone`], calling `observer` after every iteration.
pub fn run_monotone_observed<S: CooperativeSystem + ?Sized>(
    sys: &S,
    env: &Envelope,
    cfg: &MonotoneConfig,
    mut observer: impl FnMut(&IterationSnapshot),
) -> Result<IterationReport> {
    if !(cfg.tol_step > 0.0 && cfg.tol_unique > 0.0 && cfg.ordering_tol >= 0.0 && cfg.m_scale > 0.0)
    {
        return Err(Error::Config("monotone tolerances and M scale must be positive".into()));
    }
    let coop = verify_cooperative(sys, env, cfg.samples.min(9))?;
    if !coop.passed {
        return Err(Error::InvalidEnvelope(format!(
            "system is not cooperative in the envelope: min f_y = {:e}, min g_x = {:e} at {:?}",
            coop.min_f_y, coop.min_g_x, coop.witness
        )));
    }
    let sub_report = verify_subsolution(sys, &env.sub)?;
    if !sub_report.passed {
        return Err(Error::InvalidEnvelope(format!(
            "lower pair is not a subsolution (worst margin {:e})",
            sub_report.worst_margin()
        )));
    }
    let sup_report = verify_supersolution(sys, &env.sup)?;
    if !sup_report.passed {
        return Err(Error::InvalidEnvelope(format!(
            "upper pair is not a supersolution (worst margin {:e})",
            sup_report.worst_margin()
        )));
    }

    let period = env.period();
    let intervals = env.intervals();
    let fixed = cfg.m_override;
    let adaptive = fixed.is_none() && cfg.adaptive_m;
    let m_initial = match fixed {
        Some(m) => m,
        None => cfg.m_scale * choose_m(sys, env, cfg.samples)?,
    };
    let mut m = m_initial;
    let mut solver = LinearPeriodicSolver::new(m, period, intervals)?;
    // M adapts until both chains have come within FREEZE_STEP; a chain that
    // gets there first waits for the other (see FREEZE_STEP).
    let mut frozen = !adaptive;
    let mut asc_waiting = false;
    let mut desc_waiting = false;

    let mut ascending = env.sub.clone();
    let mut descending = env.sup.clone();
    let mut chain_gaps = Vec::new();
    let mut scale = 1.0_f64.max(descending.sup_norm());
    let mut done = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        if !frozen && iterations > 1 && (iterations - 1) % cfg.refresh_every.max(1) == 0 {
            let bound = sample_own_decay(
                sys,
                (&ascending.x, &ascending.y),
                (&descending.x, &descending.y),
                cfg.adaptive_samples,
                1,
            )?;
            let next = cfg.m_scale * iteration_constant_from_bound(bound);
            if next != m {
                m = next;
                solver = LinearPeriodicSolver::new(m, period, intervals)?;
            }
        }

        let step = |waiting: bool, current: &PeriodicPair| {
            if waiting {
                Ok(current.clone())
            } else {
                iterate_with(sys, &solver, current)
            }
        };
        let (asc_next, desc_next) = rayon::join(
            || step(asc_waiting, &ascending),
            || step(desc_waiting, &descending),
        );
        let (mut asc_next, mut desc_next) = (asc_next?, desc_next?);

        let tol = cfg.ordering_tol * scale;
        let breach = |(node, which, violation)| Error::MonotonicityBreach {
            iteration: iterations,
            node,
            which,
            violation,
            m,
        };
        let unclamped = (asc_next.clone(), desc_next.clone());
        enforce_chain(&ascending.x, &mut asc_next.x, &mut desc_next.x, &descending.x, tol, X_LABELS)
            .map_err(breach)?;
        enforce_chain(&ascending.y, &mut asc_next.y, &mut desc_next.y, &descending.y, tol, Y_LABELS)
            .map_err(breach)?;
        resync_derivatives(&unclamped.0, &mut asc_next, m);
        resync_derivatives(&unclamped.1, &mut desc_next, m);

        let gap = ChainGap {
            ascending: asc_next.distance(&ascending),
            descending: desc_next.distance(&descending),
            between: desc_next.distance(&asc_next),
        };
        ascending = asc_next;
        descending = desc_next;
        scale = 1.0_f64.max(descending.sup_norm());
        chain_gaps.push(gap);
        observer(&IterationSnapshot {
            iteration: iterations,
            m,
            ascending: &ascending,
            descending: &descending,
            gap,
        });

        if !frozen {
            // a small step alone is not enough: with a large M early on both
            // chains crawl, so the estimated tail must be small as well
            let freeze = FREEZE_STEP * scale;
            let near = |now: f64, before: Option<f64>| {
                now <= freeze
                    && before.is_some_and(|b| remaining_distance(now, b) <= FREEZE_TAIL * freeze)
            };
            let prev = chain_gaps.len().checked_sub(2).map(|i| chain_gaps[i]);
            asc_waiting |= near(gap.ascending, prev.map(|g| g.ascending));
            desc_waiting |= near(gap.descending, prev.map(|g| g.descending));
            if asc_waiting && desc_waiting {
                frozen = true;
                asc_waiting = false;
                desc_waiting = false;
            }
            continue;
        }

        let step_tol = cfg.tol_step * scale;
        let largest = gap.ascending.max(gap.descending);
        if largest <= step_tol {
            let tail = match chain_gaps.len() {
                n if n >= 2 => {
                    let prev = &chain_gaps[n - 2];
                    remaining_distance(gap.ascending, prev.ascending)
                        .max(remaining_distance(gap.descending, prev.descending))
                }
                _ => f64::INFINITY,
            };
            // at the roundoff floor the ratio estimate is meaningless
            if tail <= step_tol || largest <= 1e-3 * step_tol {
                done = true;
                break;
            }
        }
    }

    let residual_minimal = fixed_point_residual(sys, &ascending.x, &ascending.y)?;
    let residual_maximal = fixed_point_residual(sys, &descending.x, &descending.y)?;
    let between = descending.distance(&ascending);
    let report = IterationReport {
        converged: done && between <= cfg.tol_unique * scale,
        minimal: ascending,
        maximal: descending,
        iterations,
        chain_gaps,
        m_initial,
        m_used: m,
        scale,
        residual_minimal,
        residual_maximal,
        residual_tolerance: 1e-6 * rhs_scale(sys, env)?,
    };
    if done {
        Ok(report)
    } else {
        Err(Error::NonConvergence {
            report: Box::new(report),
        })
    }
}

/// Largest `|F(t + p, x, y) - F(t, x, y)|` over the given points.
pub fn periodicity_mismatch<S: CooperativeSystem + ?Sized>(
    sys: &S,
    points: &[LatticePoint],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        let (f0, g0) = sys.rhs(p.t, p.x, p.y)?;
        let (f1, g1) = sys.rhs(p.t + sys.period(), p.x, p.y)?;
        worst = worst.max((f1 - f0).abs()).max((g1 - g0).abs());
    }
    Ok(worst)
}

/// Largest relative error of the analytic partials against central differences.
pub fn derivative_mismatch<S: CooperativeSystem + ?Sized>(
    sys: &S,
    points: &[LatticePoint],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in points {
        let jac = sys.jacobian(p.t, p.x, p.y)?;
        let hx = 1e-6 * p.x.abs().max(1e-3);
        let hy = 1e-6 * p.y.abs().max(1e-3);
        let (fxp, gxp) = sys.rhs(p.t, p.x + hx, p.y)?;
        let (fxm, gxm) = sys.rhs(p.t, p.x - hx, p.y)?;
        let (fyp, gyp) = sys.rhs(p.t, p.x, p.y + hy)?;
        let (fym, gym) = sys.rhs(p.t, p.x, p.y - hy)?;
        let numeric = [
            (jac.f_x, (fxp - fxm) / (2.0 * hx)),
            (jac.g_x, (gxp - gxm) / (2.0 * hx)),
            (jac.f_y, (fyp - fym) / (2.0 * hy)),
            (jac.g_y, (gyp - gym) / (2.0 * hy)),
        ];
        for (exact, fd) in numeric {
            worst = worst.max((exact - fd).abs() / exact.abs().max(1e-6));
        }
    }
    Ok(worst)
}
