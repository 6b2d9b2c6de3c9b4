//! Scalar root finding, damped fixed-point iteration and bounded Nelder-Mead.
//!
//! Everything here is a pure function of its arguments. The model and the
//! extraction pipeline only ever talk to these three entry points, so the
//! convergence behaviour of the whole crate is decided in this module.

mod root;
mod simplex;

pub use root::{central_difference, fixed_point, solve_bracketed, solve_bracketed_newton};
pub use simplex::{nelder_mead, nelder_mead_with_steps, SimplexResult};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("not converged after {} iterations (residual {})", .0.iterations, .0.residual)]
    NotConverged(SolveOutcome),
    #[error("invalid solver options: {0}")]
    InvalidOptions(&'static str),
}

/// Tolerances and iteration limits shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute residual tolerance.
    pub abs_tol: f64,
    /// Relative step (or bracket width) tolerance.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Under-relaxation factor for fixed-point loops, in (0, 1].
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iter: 200,
            damping: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) {
            return Err(NumericsError::InvalidOptions("abs_tol must be > 0"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidOptions("rel_tol must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(NumericsError::InvalidOptions("max_iter must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(NumericsError::InvalidOptions("damping must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

/// Result of a scalar solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOutcome {
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}
