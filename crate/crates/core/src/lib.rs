//! Periodic solutions of the cell-volume flux system
//!
//! ```text
//! x' = alpha(t) - beta x / y
//! y' = -gamma(t) + sigma x / y + eps / y
//! ```
//!
//! where `x` is the solute mass, `y` the water volume, `alpha`, `gamma` are
//! positive periodic forcings and `beta`, `sigma`, `eps` positive constants.
//!
//! The positive periodic solution exists exactly when
//! `beta * mean(gamma) - sigma * mean(alpha) > 0`. It is computed by monotone
//! iteration between an explicit sub- and supersolution envelope, and its
//! attraction of other positive solutions is checked by direct integration.
//!
//! Modules, bottom-up:
//!
//! - [`periodic`]: periodic forcings, the shared uniform grid, quadrature and
//!   zero-mean primitives.
//! - [`linear`]: the periodic solution of `y' + a y = b(t)`.
//! - [`monotone`]: monotone iteration for cooperative planar systems.
//! - [`cell_model`]: the cell-volume system, its envelope construction and
//!   the end-to-end solve.
//! - [`trajectory`]: fixed-step integration and attraction metrics.

pub mod cell_model;
pub mod error;
pub mod linear;
pub mod monotone;
pub mod periodic;
pub mod trajectory;

pub use error::{Error, Result};
