//! Two-scale and very weak pairings, the corrector error, and ε-convergence
//! studies.

pub mod bundle;
pub mod pairing;
pub mod study;

use thiserror::Error;

pub use bundle::{
    default_very_weak_v2, CellFactor, CellIntegrator, CellRule, PeriodicFactor, TestBundle, TimeFactor, Trig,
};
pub use pairing::{
    corrector_error, corrector_limit_pairing, l2_error, limit_pairing, name3_residual, two_scale_pairing,
    very_weak_pairing,
};
pub use study::{
    convergence_study, observed_orders, ConvergenceReport, EpsilonMetrics, PairingValues, StudyConfig, METRIC_NAMES,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("fast factor is not mean-zero over the fluid cell: integral {0:e}")]
    NotMeanZero(f64),
    #[error("incompatible inputs: {0}")]
    Mismatch(String),
}

/// Failure of one stage of a convergence study.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}{}: {message}", .eps.map(|e| format!(" (eps = {e})")).unwrap_or_default())]
pub struct StudyError {
    pub stage: &'static str,
    pub eps: Option<f64>,
    pub message: String,
}

impl StudyError {
    pub fn new(stage: &'static str, eps: Option<f64>, message: String) -> Self {
        Self { stage, eps, message }
    }
}
