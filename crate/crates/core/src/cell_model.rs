//! The cell-volume flux system and the construction of its periodic solution.
//!
//! ```text
//! x' = alpha(t) - beta x / y
//! y' = -gamma(t) + sigma x / y + eps / y
//! ```
//!
//! The system is cooperative on `y > 0`. A positive periodic solution exists
//! iff `D = beta * mean(gamma) - sigma * mean(alpha) > 0`, and any such
//! solution satisfies `D = (eps * beta / p) * int_0^p dy / y`.
//!
//! The envelope used for monotone iteration is:
//!
//! - subsolution: constants `(c_x, c_y)` with `beta c_x / c_y < min alpha` and
//!   `sigma c_x / c_y + eps / c_y > max gamma`;
//! - supersolution: `A` the periodic solution of `A' = alpha + theta - beta A / M_env`
//!   and `B = M_env + y0` with `y0' = -(gamma - mean(gamma))`, for small
//!   `theta > 0` and large `M_env`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{LinearPeriodicProblem, solve_linear_periodic};
use crate::monotone::{
    run_monotone, verify_supersolution, CooperativeSystem, Envelope, IterationReport, Jacobian,
    MonotoneConfig, PeriodicPair,
};
use crate::periodic::{
    default_mean_tolerance, zero_mean_primitive_with_tolerance, GridFunction, PeriodicForcing,
    DEFAULT_GRID,
};

const MAX_DOUBLINGS: usize = 60;

/// Coefficients of the cell-volume system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha: PeriodicForcing,
    pub gamma: PeriodicForcing,
    pub beta: f64,
    pub sigma: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(
        alpha: PeriodicForcing,
        gamma: PeriodicForcing,
        beta: f64,
        sigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        for (name, v) in [("beta", beta), ("sigma", sigma), ("epsilon", epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if alpha.period() != gamma.period() {
            return Err(Error::Config(format!(
                "alpha period {} differs from gamma period {}",
                alpha.period(),
                gamma.period()
            )));
        }
        Ok(Self {
            alpha,
            gamma,
            beta,
            sigma,
            epsilon,
        })
    }

    /// `alpha = 2 + sin(2 pi t)`, `gamma = 1 + cos^2(2 pi t)`, `beta = 2`,
    /// `sigma = 1`, `eps = 0.2`, period 1.
    pub fn demo() -> Self {
        Self::new(
            PeriodicForcing::sinusoid(1.0, 2.0, 1.0, 1).expect("valid forcing"),
            PeriodicForcing::raised_cos_squared(1.0, 1.0, 1.0, 1).expect("valid forcing"),
            2.0,
            1.0,
            0.2,
        )
        .expect("valid parameters")
    }

    /// Time-independent forcings `alpha = alpha0`, `gamma = gamma0`.
    pub fn autonomous(
        period: f64,
        alpha0: f64,
        gamma0: f64,
        beta: f64,
        sigma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        Self::new(
            PeriodicForcing::constant(period, alpha0)?,
            PeriodicForcing::constant(period, gamma0)?,
            beta,
            sigma,
            epsilon,
        )
    }

    pub fn period(&self) -> f64 {
        self.alpha.period()
    }

    /// Both forcings must be strictly positive at every grid node.
    pub fn check_positive_forcings(&self, intervals: usize) -> Result<()> {
        for (name, forcing) in [("alpha", &self.alpha), ("gamma", &self.gamma)] {
            let grid = forcing.sample(intervals)?;
            if let Some(k) = grid.values().iter().position(|&v| v <= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive; {name}({}) = {}",
                    grid.time(k),
                    grid.values()[k]
                )));
            }
        }
        Ok(())
    }
}

impl CooperativeSystem for ModelParams {
    fn period(&self) -> f64 {
        self.alpha.period()
    }

    fn rhs(&self, t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("water volume must be positive, got y = {y}")));
        }
        let ratio = x / y;
        Ok((
            self.alpha.eval(t) - self.beta * ratio,
            -self.gamma.eval(t) + self.sigma * ratio + self.epsilon / y,
        ))
    }

    fn jacobian(&self, _t: f64, x: f64, y: f64) -> Result<Jacobian> {
        if !(y > 0.0) {
            return Err(Error::Domain(format!("water volume must be positive, got y = {y}")));
        }
        let inv = 1.0 / y;
        Ok(Jacobian {
            f_x: -self.beta * inv,
            f_y: self.beta * x * inv * inv,
            g_x: self.sigma * inv,
            g_y: -(self.sigma * x + self.epsilon) * inv * inv,
        })
    }
}

/// Means of the forcings and `D = beta * mean(gamma) - sigma * mean(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub alpha_mean: f64,
    pub gamma_mean: f64,
    pub value: f64,
}

impl Condition {
    pub fn holds(&self) -> bool {
        self.value > 0.0
    }
}

pub fn necessary_condition(params: &ModelParams, intervals: usize) -> Result<Condition> {
    let (alpha_mean, _) = params.alpha.mean_decompose(intervals)?;
    let (gamma_mean, _) = params.gamma.mean_decompose(intervals)?;
    Ok(Condition {
        alpha_mean,
        gamma_mean,
        value: params.beta * gamma_mean - params.sigma * alpha_mean,
    })
}

/// `|D - (eps beta / p) int_0^p dt / y|`; zero for an exact periodic solution.
pub fn identity_residual(params: &ModelParams, y: &GridFunction) -> Result<f64> {
    if let Some(k) = y.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "water volume must be positive, got y({}) = {}",
            y.time(k),
            y.values()[k]
        )));
    }
    let d = necessary_condition(params, y.intervals())?.value;
    let inverse = y.map(|v| 1.0 / v);
    Ok((d - params.epsilon * params.beta / y.period() * inverse.integrate_period()).abs())
}

/// Constant subsolution `(c_x, c_y)` with `c_x = ratio * c_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsolutionConstants {
    pub c_x: f64,
    pub c_y: f64,
    pub ratio: f64,
    /// `min_t (alpha - beta c_x / c_y)`
    pub margin_x: f64,
    /// `min_t (-gamma + sigma c_x / c_y + eps / c_y)`
    pub margin_y: f64,
}

impl SubsolutionConstants {
    pub fn pair(&self, period: f64, intervals: usize) -> PeriodicPair {
        PeriodicPair::constant(period, intervals, self.c_x, self.c_y)
    }

    fn with_c_y(params: &ModelParams, ratio: f64, c_y: f64, intervals: usize) -> Result<Self> {
        let alpha = params.alpha.sample(intervals)?;
        let gamma = params.gamma.sample(intervals)?;
        Ok(Self {
            c_x: ratio * c_y,
            c_y,
            ratio,
            margin_x: alpha.min() - params.beta * ratio,
            margin_y: -gamma.max() + params.sigma * ratio + params.epsilon / c_y,
        })
    }
}

/// Constants with a factor-2 margin in both subsolution inequalities.
pub fn build_subsolution(params: &ModelParams, intervals: usize) -> Result<SubsolutionConstants> {
    let alpha = params.alpha.sample(intervals)?;
    let gamma = params.gamma.sample(intervals)?;
    let ratio = alpha.min() / (2.0 * params.beta);
    let excess = (gamma.max() - params.sigma * ratio).max(params.epsilon / 2.0);
    let c_y = (params.epsilon / (2.0 * excess)).min(1.0);
    SubsolutionConstants::with_c_y(params, ratio, c_y, intervals)
}

/// The two constants of the supersolution construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupersolutionConfig {
    pub theta: f64,
    /// Scale `M` of the supersolution, distinct from the iteration constant.
    pub m_env: f64,
}

impl SupersolutionConfig {
    /// Requires `0 < theta < D / sigma` and `m_env > 0`.
    pub fn validate(&self, condition: &Condition, sigma: f64) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < condition.value / sigma) {
            return Err(Error::Construction(format!(
                "theta = {} must lie in (0, {})",
                self.theta,
                condition.value / sigma
            )));
        }
        if !(self.m_env > 0.0 && self.m_env.is_finite()) {
            return Err(Error::Construction(format!("M_env must be positive, got {}", self.m_env)));
        }
        Ok(())
    }
}

/// `mean(gamma)`, `gamma - mean(gamma)` and the zero-mean `y0` with `y0' = mean(gamma) - gamma`.
fn gamma_primitive(
    params: &ModelParams,
    intervals: usize,
) -> Result<(f64, GridFunction, GridFunction)> {
    let gamma = params.gamma.sample(intervals)?;
    let (mean, tilde) = gamma.mean_decompose();
    // the mean left in tilde is roundoff relative to gamma, not to tilde
    let tolerance = default_mean_tolerance(&gamma);
    let y0 = zero_mean_primitive_with_tolerance(&tilde.scale(-1.0), tolerance)?;
    Ok((mean, tilde, y0))
}

/// Supersolution pair `(A, B)` with exact derivatives, plus `y0`.
#[derive(Debug, Clone)]
pub struct Supersolution {
    pub pair: PeriodicPair,
    pub y0: GridFunction,
    pub gamma_mean: f64,
}

pub fn build_supersolution(
    params: &ModelParams,
    cfg: &SupersolutionConfig,
    intervals: usize,
) -> Result<Supersolution> {
    let condition = necessary_condition(params, intervals)?;
    if !condition.holds() {
        return Err(Error::ConditionViolated { d: condition.value });
    }
    cfg.validate(&condition, params.sigma)?;
    let alpha = params.alpha.sample(intervals)?;
    let (gamma_mean, gamma_tilde, y0) = gamma_primitive(params, intervals)?;
    let rate = params.beta / cfg.m_env;
    let forcing = alpha.shift(cfg.theta);
    let a = solve_linear_periodic(&LinearPeriodicProblem::new(rate, forcing.clone())?)?;
    let da = forcing.zip_map(&a, |f, v| f - rate * v);
    let b = y0.shift(cfg.m_env);
    if b.min() <= 0.0 {
        return Err(Error::Construction(format!(
            "M_env = {} does not exceed max|y0| = {}; B is not positive",
            cfg.m_env,
            y0.sup_norm()
        )));
    }
    let db = gamma_tilde.scale(-1.0);
    Ok(Supersolution {
        pair: PeriodicPair::new(a, b, da, db)?,
        y0,
        gamma_mean,
    })
}

/// Minimum margins of the two supersolution inequalities:
/// `theta - beta A y0 / (M (M + y0))` and
/// `mean(gamma) - sigma A / (M + y0) - eps / (M + y0)`.
pub fn supersolution_margins(
    params: &ModelParams,
    cfg: &SupersolutionConfig,
    sup: &Supersolution,
) -> (f64, f64) {
    let m = cfg.m_env;
    let mut first = f64::INFINITY;
    let mut second = f64::INFINITY;
    for (&a, &y0) in sup.pair.x.values().iter().zip(sup.y0.values()) {
        let b = m + y0;
        first = first.min(cfg.theta - params.beta * a * y0 / (m * b));
        second = second.min(sup.gamma_mean - params.sigma * a / b - params.epsilon / b);
    }
    (first, second)
}

fn supersolution_acceptable(
    params: &ModelParams,
    cfg: &SupersolutionConfig,
    sup: &Supersolution,
    sub: &SubsolutionConstants,
) -> Result<std::result::Result<(), String>> {
    let (first, second) = supersolution_margins(params, cfg, sup);
    if !(first > 0.0) {
        return Ok(Err(format!("x inequality margin {first:e}")));
    }
    if !(second > 0.0) {
        return Ok(Err(format!("y inequality margin {second:e}")));
    }
    if !(sup.pair.x.min() > sub.c_x && sup.pair.y.min() > sub.c_y) {
        return Ok(Err("supersolution not above subsolution".into()));
    }
    let report = verify_supersolution(params, &sup.pair)?;
    if !(report.worst_margin() > 0.0) {
        return Ok(Err(format!(
            "pointwise supersolution margin {:e}",
            report.worst_margin()
        )));
    }
    Ok(Ok(()))
}

/// `theta = D / (2 sigma)`; `M_env` doubles from `max(eps beta / D, 2 max|y0|, c_y)`
/// until the supersolution inequalities, positivity and ordering all hold.
///
/// The y inequality needs roughly `M_env > eps beta / (D - sigma theta)`, so
/// the floor sits one doubling below that scale. A supersolution far above
/// the solution makes the descending chain crawl, since its steps shrink like
/// `1 / M` while `M` is set by the largest `x` over the smallest `y`.
pub fn select_theta_m(params: &ModelParams, intervals: usize) -> Result<SupersolutionConfig> {
    let sub = build_subsolution(params, intervals)?;
    let condition = necessary_condition(params, intervals)?;
    if !condition.holds() {
        return Err(Error::ConditionViolated { d: condition.value });
    }
    let (_, _, y0) = gamma_primitive(params, intervals)?;
    let start = (params.epsilon * params.beta / condition.value)
        .max(2.0 * y0.sup_norm())
        .max(sub.c_y);
    grow_supersolution(
        params,
        &sub,
        SupersolutionConfig {
            theta: condition.value / (2.0 * params.sigma),
            m_env: start,
        },
        intervals,
        |_| true,
    )
    .map(|(cfg, _)| cfg)
}

fn grow_supersolution(
    params: &ModelParams,
    sub: &SubsolutionConstants,
    mut cfg: SupersolutionConfig,
    intervals: usize,
    encloses: impl Fn(&Supersolution) -> bool,
) -> Result<(SupersolutionConfig, Supersolution)> {
    let mut last_failure = String::new();
    for _ in 0..=MAX_DOUBLINGS {
        match build_supersolution(params, &cfg, intervals) {
            Ok(sup) => match supersolution_acceptable(params, &cfg, &sup, sub)? {
                Ok(()) if encloses(&sup) => return Ok((cfg, sup)),
                Ok(()) => last_failure = "initial points not enclosed".into(),
                Err(why) => last_failure = why,
            },
            Err(Error::Construction(why)) => last_failure = why,
            Err(e) => return Err(e),
        }
        cfg.m_env *= 2.0;
    }
    Err(Error::Construction(format!(
        "no valid supersolution after {MAX_DOUBLINGS} doublings of M_env (last failure: {last_failure})"
    )))
}

/// Sub/supersolution envelope of the cell model with its construction data.
#[derive(Debug, Clone)]
pub struct CellEnvelope {
    pub subsolution: SubsolutionConstants,
    pub supersolution_config: SupersolutionConfig,
    pub supersolution: Supersolution,
    pub envelope: Envelope,
}

pub fn build_envelope(params: &ModelParams, intervals: usize) -> Result<CellEnvelope> {
    let sub = build_subsolution(params, intervals)?;
    let cfg = select_theta_m(params, intervals)?;
    let sup = build_supersolution(params, &cfg, intervals)?;
    finish_envelope(params, sub, cfg, sup, intervals)
}

fn finish_envelope(
    params: &ModelParams,
    sub: SubsolutionConstants,
    cfg: SupersolutionConfig,
    sup: Supersolution,
    intervals: usize,
) -> Result<CellEnvelope> {
    let envelope = Envelope::new(sub.pair(params.period(), intervals), sup.pair.clone())?;
    Ok(CellEnvelope {
        subsolution: sub,
        supersolution_config: cfg,
        supersolution: sup,
        envelope,
    })
}

/// Envelope whose box at `t = 0` strictly contains every given `(x, y)`.
///
/// The subsolution constants shrink by halving `c_y` at a fixed ratio and the
/// supersolution grows by doubling `M_env`; both moves preserve the
/// differential inequalities, which are re-verified at every step.
pub fn enclosing_envelope(
    params: &ModelParams,
    intervals: usize,
    points: &[(f64, f64)],
) -> Result<CellEnvelope> {
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Construction(format!(
            "initial point ({x}, {y}) is not positive and cannot be enclosed"
        )));
    }
    let mut sub = build_subsolution(params, intervals)?;
    let mut halvings = 0;
    while points.iter().any(|&(x, y)| sub.c_x >= x || sub.c_y >= y) {
        if halvings == MAX_DOUBLINGS {
            return Err(Error::Construction(
                "could not shrink the subsolution below the initial points".into(),
            ));
        }
        sub = SubsolutionConstants::with_c_y(params, sub.ratio, sub.c_y / 2.0, intervals)?;
        halvings += 1;
    }
    let start = select_theta_m(params, intervals)?;
    let (cfg, sup) = grow_supersolution(params, &sub, start, intervals, |sup| {
        points
            .iter()
            .all(|&(x, y)| sup.pair.x.values()[0] > x && sup.pair.y.values()[0] > y)
    })?;
    finish_envelope(params, sub, cfg, sup, intervals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of grid intervals per period (even).
    pub intervals: usize,
    pub monotone: MonotoneConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            intervals: DEFAULT_GRID,
            monotone: MonotoneConfig::default(),
        }
    }
}

/// Result of the full existence/uniqueness pipeline.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub condition: Condition,
    pub envelope: CellEnvelope,
    pub report: IterationReport,
    pub identity_residual_minimal: f64,
    pub identity_residual_maximal: f64,
    /// Minimal and maximal periodic solutions agree within `tol_unique`.
    pub unique: bool,
}

impl CellSolution {
    /// The periodic solution, taken as the midpoint of the minimal and maximal limits.
    pub fn periodic_solution(&self) -> (GridFunction, GridFunction) {
        let mid = |a: &GridFunction, b: &GridFunction| a.zip_map(b, |u, v| 0.5 * (u + v));
        (
            mid(&self.report.minimal.x, &self.report.maximal.x),
            mid(&self.report.minimal.y, &self.report.maximal.y),
        )
    }
}

/// Condition check, envelope construction, monotone iteration and
/// uniqueness certificate.
pub fn solve_cell_model(params: &ModelParams, cfg: &SolverConfig) -> Result<CellSolution> {
    solve_with_envelope(params, cfg, None)
}

/// As [`solve_cell_model`] but with an envelope enclosing the given points at `t = 0`.
pub fn solve_cell_model_enclosing(
    params: &ModelParams,
    cfg: &SolverConfig,
    points: &[(f64, f64)],
) -> Result<CellSolution> {
    solve_with_envelope(params, cfg, Some(points))
}

fn solve_with_envelope(
    params: &ModelParams,
    cfg: &SolverConfig,
    points: Option<&[(f64, f64)]>,
) -> Result<CellSolution> {
    params.check_positive_forcings(cfg.intervals)?;
    let condition = necessary_condition(params, cfg.intervals)?;
    if !condition.holds() {
        return Err(Error::ConditionViolated { d: condition.value });
    }
    let envelope = match points {
        Some(points) => enclosing_envelope(params, cfg.intervals, points)?,
        None => build_envelope(params, cfg.intervals)?,
    };
    let report = run_monotone(params, &envelope.envelope, &cfg.monotone)?;
    let identity_residual_minimal = identity_residual(params, &report.minimal.y)?;
    let identity_residual_maximal = identity_residual(params, &report.maximal.y)?;
    let unique = report.converged && report.final_gap() <= cfg.monotone.tol_unique * report.scale;
    Ok(CellSolution {
        condition,
        envelope,
        report,
        identity_residual_minimal,
        identity_residual_maximal,
        unique,
    })
}
