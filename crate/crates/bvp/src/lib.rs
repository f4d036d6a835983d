//! Nonlinear two-point boundary value problem solver.
//!
//! The solution is a C¹ piecewise-cubic built by 3-stage Lobatto IIIA
//! collocation (order 4). Newton iterations on the global collocation system
//! are damped by backtracking on the residual norm, and each linear system is
//! solved by a structured elimination of its almost-block-diagonal form. After
//! each Newton convergence the defect of the interpolant is measured per
//! interval and intervals with large residuals are subdivided until every
//! interval meets the tolerance.
//!
//! ```
//! use lobatto_bvp::{solve_bvp, FnProblem, SolverOptions};
//!
//! // y' = y, y(0) = 1 on [0, 1].
//! let problem = FnProblem::new(
//!     1,
//!     |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0],
//!     |ya: &[f64], _yb: &[f64], r: &mut [f64]| r[0] = ya[0] - 1.0,
//! );
//! let mesh: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
//! let guess = vec![1.0; mesh.len()];
//! let sol = solve_bvp(&problem, &mesh, &guess, &SolverOptions::default()).unwrap();
//! assert!(sol.converged());
//! assert!((sol.evaluate(1.0).unwrap()[0] - std::f64::consts::E).abs() < 1e-6);
//! ```

mod abd;
mod problem;
mod solution;
mod solver;

use thiserror::Error;

pub use abd::AbdError;
pub use problem::{BvpProblem, FnProblem};
pub use solution::{BvpSolution, IterationRecord, Status};
pub use solver::{estimate_residual, solve_bvp, NewtonOptions, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BvpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("initial guess has {got} values, expected {expected}")]
    GuessShape { expected: usize, got: usize },
    #[error("non-finite value in the initial guess or its slope at t = {t}")]
    NonFinite { t: f64 },
    #[error("t = {t} outside [{a}, {b}]")]
    OutOfRange { t: f64, a: f64, b: f64 },
}
