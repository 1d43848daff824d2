//! Subcommand execution and file output.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::cell_solver::{effective_tensor, solve_cell_problem, CellSolveOptions, CorrectorSet, EffectiveTensor};
use crate::coefficients::{CoefficientFamily, CoefficientModel};
use crate::diagnostics::{convergence_study, ConvergenceReport, StudyConfig, TestBundle, METRIC_NAMES};
use crate::discretization::{assemble_mass, SpaceTimeField};
use crate::epsilon_solver::{direct_dofmap, solve_direct, steps_per_rule, DirectOptions};
use crate::geometry::build_perforated_domain;
use crate::io::{self, fmt_real};
use crate::linalg::SolverOptions;
use crate::macro_solver::{solve_homogenized, MacroOptions};
use crate::source::{Forcing, SourceTerm};

use super::config::{CoefficientSpec, DataSpec, RunConfig, TensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Cell,
    Macro,
    Direct,
    Study,
    Pairing,
}

/// A failure attributed to one stage of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub stage: String,
    pub message: String,
}

impl RunError {
    pub fn new(stage: &str, message: impl ToString) -> Self {
        Self {
            stage: stage.to_string(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.stage, self.message)
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunFlags {
    pub serial: bool,
}

/// Paths written by a run.
pub type Written = Vec<PathBuf>;

struct Out<'a> {
    dir: &'a Path,
    written: Written,
}

impl Out<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        io::write_text(&path, text).map_err(|e| RunError::new("output", e))?;
        self.written.push(path);
        Ok(())
    }

    fn frames(&mut self, config: &RunConfig, prefix: &str, name: &str, u: &SpaceTimeField) -> Result<(), RunError> {
        if !config.output.dumps && !config.output.vtk {
            return Ok(());
        }
        for (idx, frame) in u.frames().iter().enumerate() {
            if idx % config.output.every != 0 && idx != u.steps() {
                continue;
            }
            let t = u.time(idx);
            if config.output.dumps {
                self.write(&format!("{prefix}/frame_{idx:05}.field"), &io::format_field(frame, t))?;
            }
            if config.output.vtk {
                self.write(&format!("{prefix}/frame_{idx:05}.vtk"), &io::format_vtk(frame, name, t))?;
            }
        }
        Ok(())
    }
}

pub fn coefficient_model(config: &RunConfig) -> Result<CoefficientModel, RunError> {
    let family = match &config.coefficient {
        CoefficientSpec::Analytic(f) => f.clone(),
        CoefficientSpec::Table(p) => CoefficientFamily::Tabulated(io::read_table(p).map_err(|e| RunError::new("config", e))?),
    };
    CoefficientModel::new(family).map_err(|e| RunError::new("config", e))
}

pub fn load_data(spec: &DataSpec) -> Result<SourceTerm, RunError> {
    match spec {
        DataSpec::Closed(c) => Ok(SourceTerm::Closed(c.clone())),
        DataSpec::File(p) => {
            let dump = io::read_field(p).map_err(|e| RunError::new("config", format!("{}: {e}", p.display())))?;
            Ok(SourceTerm::Sampled(dump.to_field().map_err(|e| RunError::new("config", e))?))
        }
    }
}

fn linear(config: &RunConfig) -> SolverOptions {
    SolverOptions::with_tol(config.linear_tol)
}

fn cell_options(config: &RunConfig, flags: RunFlags) -> CellSolveOptions {
    CellSolveOptions {
        n: config.cell.n,
        steps_per_period: config.cell.steps_per_period,
        tol_period: config.cell.tol_period,
        max_periods: config.cell.max_periods,
        linear: linear(config),
        parallel: !flags.serial,
        subtract_mean: true,
    }
}

fn tensor_csv(t: &EffectiveTensor, residual: f64, periods: usize) -> String {
    let row = vec![
        fmt_real(t.b[0][0]),
        fmt_real(t.b[0][1]),
        fmt_real(t.b[1][0]),
        fmt_real(t.b[1][1]),
        fmt_real(t.mu_star),
        fmt_real(t.mu_star_h),
        fmt_real(residual),
        periods.to_string(),
    ];
    io::format_csv(
        &["b11", "b12", "b21", "b22", "mu_star", "mu_star_h", "period_residual", "periods_used"],
        &[row],
    )
}

fn run_cell(config: &RunConfig, flags: RunFlags, out: &mut Out<'_>) -> Result<(CorrectorSet, EffectiveTensor), RunError> {
    let cell = config.cell();
    let model = coefficient_model(config)?;
    let z = solve_cell_problem(&cell, &model, &cell_options(config, flags)).map_err(|e| RunError::new("cell", e))?;
    let t = effective_tensor(&z, &model, &cell);
    out.write("effective_tensor.csv", &tensor_csv(&t, z.period_residual(), z.periods_used()))?;
    let mut report = String::new();
    for dir in 0..2 {
        let rho = z.contraction_ratio(dir).map(fmt_real).unwrap_or_else(|| "nan".into());
        report.push_str(&format!("contraction_ratio_{} = {rho}\n", dir + 1));
    }
    report.push_str(&format!("max_frame_mean = {}\n", fmt_real(z.max_frame_mean())));
    report.push_str(&format!("coercivity_alpha = {}\n", fmt_real(model.alpha())));
    out.write("cell_report.txt", &report)?;
    for dir in 0..2 {
        out.frames(config, &format!("corrector_{}", dir + 1), &format!("z{}", dir + 1), z.corrector(dir))?;
    }
    Ok((z, t))
}

fn summary_csv(u: &SpaceTimeField) -> String {
    let mass = assemble_mass(u.dofmap());
    let rows: Vec<Vec<String>> = u
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let max = f.values().iter().copied().fold(0.0, f64::max);
            vec![fmt_real(u.time(i)), fmt_real(f.l2_norm(&mass)), fmt_real(max)]
        })
        .collect();
    io::format_csv(&["time", "l2", "max"], &rows)
}

fn run_macro(config: &RunConfig, flags: RunFlags, out: &mut Out<'_>) -> Result<(), RunError> {
    let tensor = match &config.macroscale.tensor {
        TensorSpec::Cell => run_cell(config, flags, out)?.1,
        TensorSpec::Prescribed { b, mu } => EffectiveTensor::prescribed(*b, *mu),
    };
    let mc = &config.macroscale;
    let forcing = Forcing::Steady(load_data(&mc.f)?);
    let u0 = load_data(&mc.u0)?;
    let mut opts = MacroOptions::new(mc.n, mc.t_final, mc.steps);
    opts.linear = linear(config);
    let u = solve_homogenized(&tensor, &forcing, &u0, &opts).map_err(|e| RunError::new("macro", e))?;
    out.write("macro_summary.csv", &summary_csv(&u))?;
    out.frames(config, "macro", "u", &u)
}

fn run_direct(config: &RunConfig, out: &mut Out<'_>) -> Result<(), RunError> {
    let cell = config.cell();
    let model = coefficient_model(config)?;
    let forcing = Forcing::Steady(load_data(&config.macroscale.f)?);
    let u0 = load_data(&config.macroscale.u0)?;
    let t_final = config.macroscale.t_final;
    let mut domains = Vec::new();
    for (&k, eps) in config.direct.cells.iter().zip(config.direct.epsilons()) {
        let domain = build_perforated_domain(eps, cell).map_err(|e| RunError::new("direct", e))?;
        let steps = steps_per_rule(eps, t_final, config.direct.steps_per_period);
        let mut opts = DirectOptions::new(config.direct.m, t_final, steps);
        opts.linear = linear(config);
        let u = solve_direct(&domain, &model, &forcing, &u0, &opts)
            .map_err(|e| RunError::new("direct", format!("eps = 1/{k}: {e}")))?;
        out.write(&format!("direct_k{k}_summary.csv"), &summary_csv(&u))?;
        out.frames(config, &format!("direct_k{k}"), "u_eps", &u)?;
        let pixel = direct_dofmap(&domain, config.direct.m).map_err(|e| RunError::new("direct", e))?.active_area();
        let (mc, se) = domain.fluid_fraction_monte_carlo(config.samples, config.seed);
        domains.push(vec![
            fmt_real(eps),
            steps.to_string(),
            fmt_real(domain.fluid_area()),
            fmt_real(pixel),
            fmt_real(mc),
            fmt_real(se),
        ]);
    }
    out.write(
        "direct_domains.csv",
        &io::format_csv(&["eps", "steps", "fluid_area", "pixel_area", "mc_estimate", "mc_stderr"], &domains),
    )
}

pub fn study_config(config: &RunConfig, flags: RunFlags) -> Result<StudyConfig, RunError> {
    let mut s = StudyConfig::new(config.cell(), coefficient_model(config)?, config.direct.epsilons());
    s.m = config.direct.m;
    s.t_final = config.macroscale.t_final;
    s.steps_per_period = config.direct.steps_per_period;
    s.u0 = load_data(&config.macroscale.u0)?;
    s.forcing = load_data(&config.macroscale.f)?;
    let dg = &config.diagnostics;
    s.bundle = TestBundle {
        v1: dg.v1.clone(),
        c1: dg.c1,
        v2: dg.v2.clone(),
        c2: dg.c2.clone(),
    };
    s.very_weak_v2 = dg.very_weak_v2.clone();
    s.r = dg.r;
    s.tol_period = config.cell.tol_period;
    s.max_periods = config.cell.max_periods;
    s.linear = linear(config);
    s.parallel = !flags.serial;
    Ok(s)
}

fn run_study(config: &RunConfig, flags: RunFlags) -> Result<ConvergenceReport, RunError> {
    convergence_study(&study_config(config, flags)?).map_err(|e| RunError::new(e.stage, e.to_string()))
}

pub fn study_csv(report: &ConvergenceReport) -> String {
    let mut header = vec!["eps"];
    header.extend(METRIC_NAMES);
    let rows: Vec<Vec<String>> = report
        .metrics
        .iter()
        .map(|m| std::iter::once(m.eps).chain(m.values()).map(fmt_real).collect())
        .collect();
    io::format_csv(&header, &rows)
}

pub fn orders_csv(report: &ConvergenceReport) -> String {
    let mut header = vec!["eps_coarse", "eps_fine"];
    header.extend(METRIC_NAMES);
    let rows: Vec<Vec<String>> = report
        .orders
        .iter()
        .zip(report.epsilons.windows(2))
        .map(|(o, e)| {
            let mut row = vec![fmt_real(e[0]), fmt_real(e[1])];
            row.extend(o.iter().map(|v| v.map(fmt_real).unwrap_or_else(|| "nan".into())));
            row
        })
        .collect();
    io::format_csv(&header, &rows)
}

fn report_text(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    for (k, v) in &report.echo {
        s.push_str(&format!("{k} = {v}\n"));
    }
    let b = report.tensor.b;
    s.push_str(&format!(
        "b = {} {} {} {}\nmu_star = {}\nmu_star_h = {}\nperiod_residual = {}\n",
        fmt_real(b[0][0]),
        fmt_real(b[0][1]),
        fmt_real(b[1][0]),
        fmt_real(b[1][1]),
        fmt_real(report.tensor.mu_star),
        fmt_real(report.tensor.mu_star_h),
        fmt_real(report.period_residual)
    ));
    for n in &report.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s
}

pub fn pairing_csv(report: &ConvergenceReport) -> String {
    let rows: Vec<Vec<String>> = report
        .metrics
        .iter()
        .map(|m| {
            let p = m.pairings;
            [m.eps, p.two_scale, p.limit, p.very_weak, p.corrector_limit, p.name3]
                .into_iter()
                .map(fmt_real)
                .collect()
        })
        .collect();
    io::format_csv(&["eps", "two_scale", "limit", "very_weak", "corrector_limit", "name3"], &rows)
}

/// Runs `command` and writes its outputs under `config.output.dir`.
pub fn run(command: Command, config: &RunConfig, flags: RunFlags) -> Result<Written, RunError> {
    let mut out = Out {
        dir: &config.output.dir,
        written: Vec::new(),
    };
    out.write("config.echo", &config.to_text())?;
    match command {
        Command::Cell => {
            run_cell(config, flags, &mut out)?;
        }
        Command::Macro => run_macro(config, flags, &mut out)?,
        Command::Direct => run_direct(config, &mut out)?,
        Command::Study => {
            let r = run_study(config, flags)?;
            out.write("study.csv", &study_csv(&r))?;
            out.write("study_orders.csv", &orders_csv(&r))?;
            out.write("study_report.txt", &report_text(&r))?;
        }
        Command::Pairing => {
            let r = run_study(config, flags)?;
            out.write("pairing.csv", &pairing_csv(&r))?;
            out.write("study_report.txt", &report_text(&r))?;
        }
    }
    Ok(out.written)
}

