//! Optimal control synthesis of N-qubit gates.
//!
//! The evolution operator is written in generalized Bloch coordinates over the
//! Gell-Mann basis, the quadratic-control optimal problem is reduced to its
//! Pontryagin extremal boundary value problem, and that problem is solved by
//! collocation with continuation in the control-cost weight.

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod pmp;
pub mod report;
pub mod synthesis;

pub use error::{Error, Result};

/// Dense complex matrix used for operators.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
