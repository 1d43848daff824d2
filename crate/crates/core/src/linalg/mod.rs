//! Sparse storage and iterative solvers.

mod solvers;
mod sparse;

use thiserror::Error;

pub use solvers::{
    solve_bicgstab, solve_bicgstab_from, solve_cg, solve_cg_from, Solution, SolverOptions,
    DEFAULT_TOL,
};
pub use sparse::{dot, norm2, SparseMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("matrix not SPD: curvature {curvature:e}")]
    NotSpd { curvature: f64 },
    #[error("BiCGStab breakdown (rho = {rho:e})")]
    Breakdown { rho: f64 },
}

/// Which Krylov method to apply to a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cg,
    BiCgStab,
}

impl Method {
    pub fn for_symmetry(symmetric: bool) -> Self {
        if symmetric {
            Method::Cg
        } else {
            Method::BiCgStab
        }
    }

    pub fn solve(
        self,
        m: &SparseMatrix,
        rhs: &[f64],
        guess: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<Solution, LinalgError> {
        match self {
            Method::Cg => solve_cg_from(m, rhs, guess, opts),
            Method::BiCgStab => solve_bicgstab_from(m, rhs, guess, opts),
        }
    }
}
