//! Incremental semiparametric regression for robot inverse dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: upper-triangular factors, Givens rank-1 updates and
//!   triangular solves.
//! - [`rrls`]: multi-output recursive regularized least squares on top of
//!   the factor update, plus the closed-form batch solution.
//! - [`rff`]: random Fourier features for the Gaussian kernel, input
//!   normalization and an exact kernel RLS reference solver.
//! - [`rbd`]: a planar two-link arm used as the simulated plant, with its
//!   linear-in-parameters regressor.
//! - [`semiparametric`]: the parametric → nonparametric cascade.
//! - [`harness`]: dataset generation, the sequential test-then-update
//!   protocol and metric summaries behind the `semiparam` binary.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod rbd;
pub mod rff;
pub mod rrls;
pub mod semiparametric;

pub use error::{Error, Result};
