//! Numerical homogenization of parabolic equations with ε-periodic spatial
//! and ε²-periodic temporal oscillations in perforated domains.

pub mod cell_solver;
pub mod cli;
pub mod coefficients;
pub mod diagnostics;
pub mod discretization;
pub mod epsilon_solver;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod macro_solver;
pub mod source;
