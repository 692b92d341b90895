//! Convex subproblem solvers used by the block-coordinate trainer.
//!
//! Every routine here is a pure function of its inputs. The batch prox keeps
//! per-column state only, so results do not depend on evaluation order.

mod multinomial;
mod nnls;
mod ridge;
mod simplex;
mod softmax;

pub use multinomial::{multinomial_fit, multinomial_objective, MultinomialFit, MultinomialOptions};
pub use nnls::{nnls_objective, nnls_solve, NnlsOptions, NnlsSolution, WeightedFactorTerm};
pub use ridge::{ridge_solve, symmetric_solve};
pub use simplex::{
    simplex_entropy_objective, simplex_entropy_prox, simplex_entropy_prox_batch, ProxSolution,
    SimplexEntropyProblem, DEFAULT_BISECTION_TOL,
};
pub use softmax::{log_softmax_rows, softmax_rows};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("normal equations are singular even after diagonal jitter")]
    SingularSystem,
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },
    #[error("dual bracket [{lo}, {hi}] does not contain a sign change (column {column})")]
    BracketFailure { column: usize, lo: f64, hi: f64 },
    #[error("bisection stalled with residual {residual:e} (column {column})")]
    BisectionStalled { column: usize, residual: f64 },
    #[error("line search step underflowed at iteration {iteration}")]
    LineSearchStall { iteration: usize },
}

pub(crate) fn check_finite(name: &str, values: &[f64]) -> Result<(), SolverError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::NonFiniteInput(name.to_string()))
    }
}
