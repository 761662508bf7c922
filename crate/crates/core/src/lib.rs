//! Eigenvalues in spectral gaps by the Schur-complement min-max principle,
//! with a B-spline discretization of radial Dirac operators.
//!
//! - [`minmax`]: the abstract finite-dimensional engine.
//! - [`spline`], [`potential`], [`dirac`]: radial Dirac channels with the
//!   upper/lower-component and free-energy splittings.
//! - [`continuation`]: coupling-constant sweeps and regularization limits.
//! - [`inequalities`]: Hardy-type inequality margins.

pub mod continuation;
pub mod dirac;
pub mod error;
pub mod exec;
pub mod fuzz;
pub mod inequalities;
pub mod linalg;
pub mod minmax;
pub mod potential;
pub mod report;
pub mod spline;

pub use error::{Error, Result};
pub use exec::Execution;
pub use minmax::{MinMaxSolution, SchurPencil, SolveOptions, SplitOperator};
pub use report::VerificationReport;
