use thiserror::Error;

use crate::monotone::IterationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// `y' = b` has no periodic solution unless `b` integrates to zero over a period.
    #[error("forcing has nonzero mean {mean:e} (tolerance {tolerance:e}); no periodic primitive exists")]
    PeriodicityViolation { mean: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "decay rate times period is {product:e}; 1 - exp(-a p) is numerically singular, \
         use the scaled limit a*y -> mean(b) instead"
    )]
    NearSingular { product: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),

    #[error("monotone iteration did not converge within {} iterations", .report.iterations)]
    NonConvergence { report: Box<IterationReport> },

    #[error(
        "ordering violated at iteration {iteration}, node {node} ({which}) by {violation:e}; \
         iteration constant {m:e} is too small, the envelope is invalid, or the grid is \
         too coarse for adaptive M (its discrete fixed point moves with M)"
    )]
    MonotonicityBreach {
        iteration: usize,
        node: usize,
        which: &'static str,
        violation: f64,
        m: f64,
    },

    /// Integrating over one period shows that any positive periodic solution
    /// needs `beta*mean(gamma) - sigma*mean(alpha) = (eps*beta/p) * int 1/y > 0`.
    #[error(
        "beta*mean(gamma) - sigma*mean(alpha) = {d:e} is not positive; \
         the period integral of 1/y would have to be nonpositive, so no positive periodic solution exists"
    )]
    ConditionViolated { d: f64 },

    #[error("solution approached y = 0 at t = {t}: last safe state (x, y) = ({x}, {y})")]
    SingularityApproached { t: f64, x: f64, y: f64 },
}
