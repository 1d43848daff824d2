//! ε-convergence studies comparing direct solutions with the homogenized
//! limit.

use std::thread;

use crate::cell_solver::{effective_tensor, solve_cell_problem, CellSolveOptions, CorrectorSet, EffectiveTensor};
use crate::coefficients::CoefficientModel;
use crate::epsilon_solver::{solve_direct, steps_per_rule, DirectOptions};
use crate::geometry::{build_perforated_domain, UnitCell};
use crate::linalg::SolverOptions;
use crate::macro_solver::{solve_homogenized, MacroOptions};
use crate::source::{ClosedForm, Forcing, SourceTerm};

use super::bundle::{default_very_weak_v2, CellFactor, CellIntegrator, CellRule, TestBundle};
use super::pairing::{
    corrector_error, corrector_limit_pairing, l2_error, limit_pairing, name3_residual, two_scale_pairing,
    very_weak_pairing,
};
use super::StudyError;

/// Column names of the per-ε metrics, in report order.
pub const METRIC_NAMES: [&str; 5] = ["l2_err", "ts_gap", "vw_gap", "name3", "corr_err"];

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub cell: UnitCell,
    pub model: CoefficientModel,
    /// Strictly decreasing, each of the form `1/k`.
    pub epsilons: Vec<f64>,
    /// Fine grid cells per ε-cell; also the cell-problem resolution.
    pub m: usize,
    pub t_final: f64,
    /// Time steps per temporal period `ε²`; also the cell-problem `1/ds`.
    pub steps_per_period: usize,
    pub u0: SourceTerm,
    pub forcing: SourceTerm,
    pub bundle: TestBundle,
    /// Fast factor of the very weak pairing, projected to zero mean over `Y*`.
    pub very_weak_v2: CellFactor,
    /// Temporal scale exponent of the name3 residual.
    pub r: f64,
    pub tol_period: f64,
    pub max_periods: usize,
    pub linear: SolverOptions,
    pub parallel: bool,
}

impl StudyConfig {
    pub fn new(cell: UnitCell, model: CoefficientModel, epsilons: Vec<f64>) -> Self {
        Self {
            cell,
            model,
            epsilons,
            m: 8,
            t_final: 0.05,
            steps_per_period: 16,
            u0: SourceTerm::Closed(ClosedForm::sin_product(1.0, 1, 1)),
            forcing: SourceTerm::Closed(ClosedForm::constant(1.0)),
            bundle: TestBundle::default(),
            very_weak_v2: default_very_weak_v2(),
            r: 2.0,
            tol_period: 1e-9,
            max_periods: 200,
            linear: SolverOptions::with_tol(1e-12),
            parallel: true,
        }
    }

    fn validate(&self) -> Result<(), StudyError> {
        let fail = |m: String| Err(StudyError::new("config", None, m));
        if self.epsilons.is_empty() {
            return fail("empty ε list".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return fail(format!("ε list must be strictly decreasing, got {:?}", self.epsilons));
        }
        for &e in &self.epsilons {
            crate::geometry::cells_per_side(e).map_err(|err| StudyError::new("config", Some(e), err.to_string()))?;
        }
        if self.steps_per_period == 0 {
            return fail("steps_per_period must be positive".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return fail(format!("final time must be positive, got {}", self.t_final));
        }
        Ok(())
    }

    /// `key = value` lines describing the study.
    pub fn echo(&self) -> Vec<(String, String)> {
        let eps: Vec<String> = self.epsilons.iter().map(|e| format!("{e}")).collect();
        vec![
            ("cell".into(), format!("{:?}", self.cell.hole())),
            ("model".into(), format!("{:?}", self.model.family())),
            ("epsilons".into(), eps.join(" ")),
            ("m".into(), self.m.to_string()),
            ("t_final".into(), self.t_final.to_string()),
            ("steps_per_period".into(), self.steps_per_period.to_string()),
            ("u0".into(), data_label(&self.u0)),
            ("f".into(), data_label(&self.forcing)),
            ("v1".into(), self.bundle.v1.to_string()),
            ("c1".into(), self.bundle.c1.to_string()),
            ("v2".into(), self.bundle.v2.to_string()),
            ("c2".into(), self.bundle.c2.to_string()),
            ("very_weak_v2".into(), self.very_weak_v2.to_string()),
            ("r".into(), self.r.to_string()),
        ]
    }
}

fn data_label(s: &SourceTerm) -> String {
    match s {
        SourceTerm::Closed(c) => c.to_string(),
        SourceTerm::Sampled(f) => format!("sampled field on n = {}", f.dofmap().grid().n()),
    }
}

/// The raw pairings behind the gap metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingValues {
    pub two_scale: f64,
    pub limit: f64,
    pub very_weak: f64,
    pub corrector_limit: f64,
    /// Signed name3 residual.
    pub name3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonMetrics {
    pub eps: f64,
    pub steps: usize,
    pub pairings: PairingValues,
    pub l2_err: f64,
    pub ts_gap: f64,
    pub vw_gap: f64,
    pub name3: f64,
    pub corr_err: f64,
}

impl EpsilonMetrics {
    pub fn values(&self) -> [f64; 5] {
        [self.l2_err, self.ts_gap, self.vw_gap, self.name3, self.corr_err]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    pub metrics: Vec<EpsilonMetrics>,
    /// `log(e_i/e_{i+1}) / log(ε_i/ε_{i+1})` per metric for consecutive ε;
    /// `None` where either error vanishes.
    pub orders: Vec<[Option<f64>; 5]>,
    pub tensor: EffectiveTensor,
    pub period_residual: f64,
    pub notes: Vec<String>,
    pub echo: Vec<(String, String)>,
}

impl ConvergenceReport {
    /// Whether metric `k` of [`METRIC_NAMES`] strictly decreases along ε.
    pub fn strictly_decreasing(&self, k: usize) -> bool {
        self.metrics.windows(2).all(|w| w[1].values()[k] < w[0].values()[k])
    }
}

pub fn observed_orders(epsilons: &[f64], metrics: &[EpsilonMetrics]) -> Vec<[Option<f64>; 5]> {
    epsilons
        .windows(2)
        .zip(metrics.windows(2))
        .map(|(e, m)| {
            let (a, b) = (m[0].values(), m[1].values());
            let scale = (e[0] / e[1]).ln();
            std::array::from_fn(|k| (a[k] > 0.0 && b[k] > 0.0).then(|| (a[k] / b[k]).ln() / scale))
        })
        .collect()
}

struct Shared<'a> {
    config: &'a StudyConfig,
    correctors: CorrectorSet,
    tensor: EffectiveTensor,
    cell_rule: CellIntegrator,
    vw_bundle: TestBundle,
}

fn run_epsilon(shared: &Shared<'_>, eps: f64) -> Result<EpsilonMetrics, StudyError> {
    let c = shared.config;
    let stage = |name: &'static str| move |e: String| StudyError::new(name, Some(eps), e);
    let domain = build_perforated_domain(eps, c.cell).map_err(|e| stage("direct")(e.to_string()))?;
    let k = domain.cells_per_side();
    let steps = steps_per_rule(eps, c.t_final, c.steps_per_period);

    let mut dopts = DirectOptions::new(c.m, c.t_final, steps);
    dopts.linear = c.linear;
    let forcing = Forcing::Steady(c.forcing.clone());
    let u0 = c.u0.clone();
    let u_eps = solve_direct(&domain, &c.model, &forcing, &u0, &dopts).map_err(|e| stage("direct")(e.to_string()))?;

    let mu = shared.tensor.mu_star_h;
    let mut mopts = MacroOptions::new(c.m * k, c.t_final, steps);
    mopts.linear = c.linear;
    let u = solve_homogenized(&shared.tensor, &forcing.scaled(mu), &u0.scaled(mu), &mopts)
        .map_err(|e| stage("macro")(e.to_string()))?;

    let pairing = stage("pairing");
    let l2_err = l2_error(&u_eps, &u).map_err(|e| pairing(e.to_string()))?;
    let ts = two_scale_pairing(&u_eps, eps, &c.bundle).map_err(|e| pairing(e.to_string()))?;
    let limit = limit_pairing(&u, &shared.cell_rule, &c.bundle);
    let vw = very_weak_pairing(&u_eps, eps, &shared.vw_bundle, &shared.cell_rule).map_err(|e| pairing(e.to_string()))?;
    let corrector_limit = corrector_limit_pairing(&u, &shared.correctors, &shared.vw_bundle);
    let name3 = name3_residual(&u_eps, eps, c.r, &c.bundle.v1, &c.bundle.c1, &c.bundle.c2);
    let corr_err = corrector_error(&u_eps, &u, &shared.correctors, eps).map_err(|e| pairing(e.to_string()))?;
    Ok(EpsilonMetrics {
        eps,
        steps,
        pairings: PairingValues {
            two_scale: ts,
            limit,
            very_weak: vw,
            corrector_limit,
            name3,
        },
        l2_err,
        ts_gap: (ts - limit).abs(),
        vw_gap: (vw - corrector_limit).abs(),
        name3: name3.abs(),
        corr_err,
    })
}

/// Runs the direct problem for every ε against one shared cell solve and
/// the matching homogenized problem, and records the five metrics.
pub fn convergence_study(config: &StudyConfig) -> Result<ConvergenceReport, StudyError> {
    config.validate()?;
    let copts = CellSolveOptions {
        n: config.m,
        steps_per_period: config.steps_per_period,
        tol_period: config.tol_period,
        max_periods: config.max_periods,
        linear: config.linear,
        parallel: config.parallel,
        subtract_mean: true,
    };
    let correctors =
        solve_cell_problem(&config.cell, &config.model, &copts).map_err(|e| StudyError::new("cell", None, e.to_string()))?;
    let tensor = effective_tensor(&correctors, &config.model, &config.cell);
    let cell_rule = CellIntegrator::new(&config.cell, CellRule::Pixelated { n: config.m });
    let vw_bundle = config.bundle.with_v2(config.very_weak_v2.projected(&cell_rule));
    let shared = Shared {
        config,
        correctors,
        tensor,
        cell_rule,
        vw_bundle,
    };

    let results: Vec<Result<EpsilonMetrics, StudyError>> = if config.parallel {
        thread::scope(|scope| {
            let handles: Vec<_> = config
                .epsilons
                .iter()
                .map(|&eps| {
                    let shared = &shared;
                    scope.spawn(move || run_epsilon(shared, eps))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("study worker panicked")).collect()
        })
    } else {
        config.epsilons.iter().map(|&eps| run_epsilon(&shared, eps)).collect()
    };
    let metrics = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = metrics.iter().find(|m| m.values().iter().any(|v| !v.is_finite())) {
        return Err(StudyError::new("pairing", Some(bad.eps), "non-finite metric".into()));
    }

    let notes = vec![
        format!(
            "macro data scaled by the discrete porosity {:.12}: forcing mu*f, initial datum mu*u0 (limit of the zero-extended data)",
            tensor.mu_star_h
        ),
        format!(
            "cell problem on the {m}x{m} cell grid with {p} steps per period, matching the direct pixelation",
            m = config.m,
            p = config.steps_per_period
        ),
    ];
    Ok(ConvergenceReport {
        orders: observed_orders(&config.epsilons, &metrics),
        epsilons: config.epsilons.clone(),
        metrics,
        tensor,
        period_residual: shared.correctors.period_residual(),
        notes,
        echo: config.echo(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientFamily, IDENTITY};

    fn metrics(eps: f64, v: f64) -> EpsilonMetrics {
        EpsilonMetrics {
            eps,
            steps: 1,
            pairings: PairingValues {
                two_scale: 0.0,
                limit: 0.0,
                very_weak: 0.0,
                corrector_limit: 0.0,
                name3: 0.0,
            },
            l2_err: v,
            ts_gap: v,
            vw_gap: 0.0,
            name3: v,
            corr_err: v,
        }
    }

    #[test]
    fn orders_of_halving_sequence() {
        let eps = [0.5, 0.25, 0.125];
        let m = [metrics(0.5, 1.0), metrics(0.25, 0.25), metrics(0.125, 0.0625)];
        let o = observed_orders(&eps, &m);
        assert_eq!(o.len(), 2);
        for row in &o {
            assert!((row[0].unwrap() - 2.0).abs() < 1e-12);
            assert_eq!(row[2], None);
        }
    }

    #[test]
    fn single_epsilon_study_has_no_orders() {
        let mut c = StudyConfig::new(UnitCell::solid(), CoefficientModel::identity(), vec![0.5]);
        c.t_final = 0.02;
        let r = convergence_study(&c).unwrap();
        assert_eq!(r.metrics.len(), 1);
        assert!(r.orders.is_empty());
        assert!(r.metrics[0].values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_epsilon_lists() {
        let base = StudyConfig::new(UnitCell::solid(), CoefficientModel::identity(), vec![0.25, 0.5]);
        let err = convergence_study(&base).unwrap_err();
        assert_eq!(err.stage, "config");
        let c = StudyConfig {
            epsilons: vec![0.3],
            ..base
        };
        assert!(convergence_study(&c).is_err());
    }

    #[test]
    fn stage_is_named_on_failure() {
        let model = CoefficientModel::new(CoefficientFamily::scalar_trig(2.0, 0.5, 0.0, 0.5)).unwrap();
        let mut c = StudyConfig::new(UnitCell::disk([0.5, 0.5], 0.25).unwrap(), model, vec![0.5]);
        c.max_periods = 1;
        c.tol_period = 1e-15;
        let err = convergence_study(&c).unwrap_err();
        assert_eq!(err.stage, "cell");
        c.max_periods = 200;
        c.tol_period = 1e-9;
        c.m = 4;
        assert_eq!(convergence_study(&c).unwrap_err().stage, "direct");
    }

    #[test]
    fn null_study_l2_and_corrector_metrics_vanish() {
        let mut c = StudyConfig::new(UnitCell::solid(), CoefficientModel::constant(IDENTITY).unwrap(), vec![0.5, 0.25]);
        c.t_final = 0.02;
        let r = convergence_study(&c).unwrap();
        for m in &r.metrics {
            assert!(m.l2_err <= 1e-9, "{m:?}");
            assert!(m.corr_err <= 1e-8, "{m:?}");
        }
    }
}
