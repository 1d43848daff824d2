//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use perfohom::cell_solver::{
    effective_tensor, solve_cell_problem, stationary_effective_tensor, CellSolveOptions, EffectiveTensor,
};
use perfohom::cli::{main_with_args, parse_config};
use perfohom::coefficients::{sym_min_eigenvalue, CoefficientFamily, CoefficientModel, Mat2, IDENTITY};
use perfohom::diagnostics::{
    convergence_study, two_scale_pairing, very_weak_pairing, CellIntegrator, CellRule, ConvergenceReport,
    StudyConfig, TestBundle, METRIC_NAMES,
};
use perfohom::discretization::quadrature::gauss_legendre;
use perfohom::discretization::{assemble_mass, BoundaryMode, DofMap, Field, Grid, SpaceTimeField};
use perfohom::epsilon_solver::{solve_direct, DirectOptions};
use perfohom::geometry::{build_perforated_domain, UnitCell};
use perfohom::linalg::SolverOptions;
use perfohom::macro_solver::{solve_homogenized, MacroOptions};
use perfohom::source::{ClosedForm, Forcing, SourceTerm};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn disk() -> UnitCell {
    UnitCell::disk([0.5, 0.5], 0.25).unwrap()
}

fn oscillating_model() -> CoefficientModel {
    CoefficientModel::new(CoefficientFamily::scalar_trig(2.0, 0.5, 0.0, 0.5)).unwrap()
}

fn cell_opts(n: usize, p: usize) -> CellSolveOptions {
    CellSolveOptions {
        n,
        steps_per_period: p,
        ..CellSolveOptions::default()
    }
}

fn tensor(cell: &UnitCell, model: &CoefficientModel, n: usize, p: usize) -> EffectiveTensor {
    let z = solve_cell_problem(cell, model, &cell_opts(n, p)).expect("cell solve");
    effective_tensor(&z, model, cell)
}

fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
    (0..4).map(|e| (a[e / 2][e % 2] - b[e / 2][e % 2]).abs()).fold(0.0, f64::max)
}

fn identity_reduction() -> Outcome {
    let t = tensor(&UnitCell::solid(), &CoefficientModel::identity(), 64, 64);
    let err = max_diff(&t.b, &IDENTITY);
    outcome(
        err <= 1e-10 && t.mu_star == 1.0 && t.mu_star_h == 1.0,
        format!("max |b - I| = {err:.3e}, mu = {}", t.mu_star),
    )
}

fn layered_medium() -> Outcome {
    // ∫₀¹ dy / (2 + sin 2πy) by composite Gauss, against 1/√3
    let (x, w) = gauss_legendre(12);
    let panels = 64;
    let mut harmonic = 0.0;
    for p in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            let y = (p as f64 + xi) / panels as f64;
            harmonic += wi / panels as f64 / (2.0 + (2.0 * PI * y).sin());
        }
    }
    let oracle_ok = (harmonic - 1.0 / 3f64.sqrt()).abs() <= 1e-12;
    let b11_exact = 1.0 / harmonic;
    let model = CoefficientModel::new(CoefficientFamily::LayeredX { c0: 2.0, c1: 1.0 }).unwrap();
    let t = tensor(&UnitCell::solid(), &model, 128, 64);
    let e11 = (t.b[0][0] - b11_exact).abs() / b11_exact;
    let e22 = (t.b[1][1] - 2.0).abs();
    let off = t.b[0][1].abs().max(t.b[1][0].abs());
    outcome(
        oracle_ok && e11 <= 1e-2 && e22 <= 1e-6 && off <= 1e-8,
        format!("rel err b11 = {e11:.3e}, |b22 - 2| = {e22:.3e}, max |b12|,|b21| = {off:.3e}"),
    )
}

fn time_average() -> Outcome {
    let model = CoefficientModel::new(CoefficientFamily::SeparableTime {
        base: IDENTITY,
        c0: 2.0,
        c1: 1.0,
    })
    .unwrap();
    let t = tensor(&UnitCell::solid(), &model, 32, 32);
    let err = max_diff(&t.b, &[[2.0, 0.0], [0.0, 2.0]]);
    outcome(err <= 1e-8, format!("max |b - 2I| = {err:.3e}"))
}

fn parabolic_elliptic() -> Outcome {
    let mut worst = 0.0f64;
    let mut coercive = true;
    for a0 in [IDENTITY, [[2.0, 0.0], [0.0, 1.0]], [[2.0, 0.3], [0.3, 1.0]]] {
        let model = CoefficientModel::constant(a0).unwrap();
        let periodic = tensor(&disk(), &model, 32, 16);
        let stationary =
            stationary_effective_tensor(&disk(), &model, 32, &SolverOptions::with_tol(1e-13)).expect("stationary");
        let scale = stationary.b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for r in 0..2 {
            for c in 0..2 {
                let s = stationary.b[r][c];
                let denom = if s.abs() > 1e-12 * scale { s.abs() } else { scale };
                worst = worst.max((periodic.b[r][c] - s).abs() / denom);
            }
        }
        coercive &= sym_min_eigenvalue(&periodic.b) > 0.0;
    }
    outcome(
        worst <= 1e-8 && coercive,
        format!("max componentwise relative gap = {worst:.3e}, symmetric parts positive definite = {coercive}"),
    )
}

fn cell_internals() -> Outcome {
    let model = oscillating_model();
    let z = solve_cell_problem(&disk(), &model, &cell_opts(32, 32)).expect("cell solve");
    let rho: Vec<f64> = (0..2).map(|j| z.contraction_ratio(j).unwrap_or(f64::NAN)).collect();
    let geometric = rho.iter().all(|r| *r < 1.0);
    let mean = z.max_frame_mean();

    let b = |n, p| tensor(&disk(), &model, n, p).b;
    let (coarse, mid, fine) = (b(8, 4), b(16, 16), b(32, 64));
    let d_fine = max_diff(&fine, &mid);
    let d_coarse = max_diff(&mid, &coarse);
    let stable = d_fine <= 3.0 * d_coarse;
    outcome(
        geometric && mean <= 1e-10 && stable,
        format!(
            "rho = [{:.3e}, {:.3e}], max frame mean = {mean:.3e}, |b(32,1/64) - b(16,1/16)| = {d_fine:.3e} vs 3 x {d_coarse:.3e}",
            rho[0], rho[1]
        ),
    )
}

fn heat_error(steps: usize) -> f64 {
    let t = 0.05;
    let mut o = MacroOptions::new(64, t, steps);
    o.linear = SolverOptions::with_tol(1e-12);
    let u0 = SourceTerm::Closed(ClosedForm::sin_product(1.0, 1, 1));
    let u = solve_homogenized(&EffectiveTensor::prescribed(IDENTITY, 1.0), &Forcing::zero(), &u0, &o).unwrap();
    let last = u.last();
    let d = last.dofmap().clone();
    let decay = (-2.0 * PI * PI * t).exp();
    (0..d.n_equations())
        .map(|e| {
            let (i, j) = d.equation_node(e);
            let x = d.grid().node_coord(i, j);
            (last.values()[e] - decay * (PI * x[0]).sin() * (PI * x[1]).sin()).abs()
        })
        .fold(0.0, f64::max)
}

fn heat_kernel() -> Outcome {
    let e256 = heat_error(256);
    let e128 = heat_error(128);
    let ratio = e128 / e256;
    outcome(
        e256 <= 2e-3 && (1.7..=2.3).contains(&ratio),
        format!("max error (dt = T/256) = {e256:.3e}, ratio e(T/128)/e(T/256) = {ratio:.3}"),
    )
}

fn study_line(r: &ConvergenceReport) -> String {
    r.metrics
        .iter()
        .map(|m| {
            let v: Vec<String> = m.values().iter().map(|x| format!("{x:.3e}")).collect();
            format!("eps = {}: [{}]", m.eps, v.join(", "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn convergence() -> Outcome {
    let config = StudyConfig::new(disk(), oscillating_model(), vec![0.25, 0.125, 0.0625]);
    let r = convergence_study(&config).expect("study");
    let decreasing: Vec<&str> = METRIC_NAMES
        .iter()
        .enumerate()
        .filter(|(k, _)| !r.strictly_decreasing(*k))
        .map(|(_, n)| *n)
        .collect();
    let ratios: Vec<f64> = r.metrics.windows(2).map(|w| w[1].l2_err / w[0].l2_err).collect();
    let ratio_ok = ratios.iter().all(|q| *q <= 0.8);
    let ratio_text: Vec<String> = ratios.iter().map(|q| format!("{q:.3}")).collect();
    outcome(
        decreasing.is_empty() && ratio_ok,
        format!(
            "{}; l2 ratios [{}]; not decreasing: {decreasing:?}; l2_err, ts_gap, vw_gap, name3, corr_err",
            study_line(&r),
            ratio_text.join(", ")
        ),
    )
}

fn null_study() -> Outcome {
    let config = StudyConfig::new(UnitCell::solid(), CoefficientModel::identity(), vec![0.25, 0.125, 0.0625]);
    let r = convergence_study(&config).expect("study");
    let mut over = Vec::new();
    for m in &r.metrics {
        for (k, v) in m.values().iter().enumerate() {
            if *v > 1e-6 {
                over.push(format!("{}@{}", METRIC_NAMES[k], m.eps));
            }
        }
    }
    outcome(over.is_empty(), format!("{}; above 1e-6: {over:?}", study_line(&r)))
}

const DETERMINISM_CONFIG: &str = "\
geometry.hole = disk
geometry.radius = 0.25
coefficient.family = trig
coefficient.trig = 2 0.5 0 0.5  0 0 0 0  0 0 0 0  2 0.5 0 0.5
cell.n = 16
cell.ds = 1/16
macro.n = 16
macro.t_final = 0.02
macro.dt = 0.02/16
macro.f = const 1
macro.u0 = sin 1 1
direct.epsilon = 1/2 1/4
output.dumps = true
output.every = 4
";

fn run_cli(config: &std::path::Path, out: &std::path::Path, command: &str) -> i32 {
    let args = [
        "perfohom",
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--serial",
    ];
    main_with_args(args, &mut std::io::stderr())
}

fn tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn free_field(n: usize, steps: usize, g: impl Fn([f64; 2]) -> f64) -> SpaceTimeField {
    let d = Arc::new(DofMap::full(Grid::new(n).unwrap(), BoundaryMode::FreeSquare));
    let f = Field::from_fn(d, g);
    let mut st = SpaceTimeField::new(f.clone(), 0.05 / steps as f64).unwrap();
    for _ in 0..steps {
        st.push(f.clone()).unwrap();
    }
    st
}

fn determinism_and_invariants() -> Outcome {
    let mut failures = Vec::new();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    std::fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    for command in ["cell", "macro", "direct", "study", "pairing"] {
        let out = tmp.path().join(command);
        if run_cli(&cfg, &out, command) != 0 {
            failures.push(format!("{command} run failed"));
            continue;
        }
        let first = tree(&out);
        std::fs::remove_dir_all(&out).unwrap();
        if run_cli(&cfg, &out, command) != 0 || tree(&out) != first {
            failures.push(format!("{command} outputs differ"));
        }
    }

    let parsed = parse_config(DETERMINISM_CONFIG).unwrap();
    if parse_config(&parsed.to_text()).unwrap() != parsed {
        failures.push("config round-trip".into());
    }

    // periodicity of the corrector in s
    let z = solve_cell_problem(&disk(), &oscillating_model(), &cell_opts(16, 16)).unwrap();
    if z.period_residual() > 1e-9 {
        failures.push(format!("period residual {:e}", z.period_residual()));
    }
    // coercivity rejection
    if CoefficientModel::constant([[1.0, 2.0], [0.0, 1.0]]).is_ok() {
        failures.push("degenerate coefficient accepted".into());
    }
    // bilinearity of the two-scale pairing
    let u = free_field(16, 8, |x| (PI * x[0]).sin() + x[1]);
    let w = free_field(16, 8, |x| x[0] * x[1]);
    let combo = free_field(16, 8, |x| 2.0 * ((PI * x[0]).sin() + x[1]) - 0.5 * x[0] * x[1]);
    let b = TestBundle::default();
    let (pu, pw, pc) = (
        two_scale_pairing(&u, 0.25, &b).unwrap(),
        two_scale_pairing(&w, 0.25, &b).unwrap(),
        two_scale_pairing(&combo, 0.25, &b).unwrap(),
    );
    if (pc - 2.0 * pu + 0.5 * pw).abs() > 1e-12 * (pu.abs() + pw.abs()) * 3.0 {
        failures.push("pairing not bilinear".into());
    }
    // mean-zero gate
    let rule = CellIntegrator::new(&disk(), CellRule::Pixelated { n: 8 });
    if very_weak_pairing(&u, 0.25, &b, &rule).is_ok() {
        failures.push("non-mean-zero fast factor accepted".into());
    }
    // dissipativity of the direct solver
    let domain = build_perforated_domain(0.25, disk()).unwrap();
    let u0 = SourceTerm::Closed(ClosedForm::sin_product(1.0, 1, 1));
    let ue = solve_direct(&domain, &oscillating_model(), &Forcing::zero(), &u0, &DirectOptions::new(8, 0.02, 40)).unwrap();
    let mass = assemble_mass(ue.dofmap());
    let norms: Vec<f64> = ue.frames().iter().map(|f| f.l2_norm(&mass)).collect();
    if !norms.windows(2).all(|p| p[1] <= p[0]) {
        failures.push("direct energy increased".into());
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "serial runs byte-identical for all subcommands; config round-trip; periodicity, coercivity rejection, bilinearity, mean-zero gate, dissipativity".to_string()
        } else {
            format!("failures: {failures:?}")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("1 identity reduction", identity_reduction, Some(Duration::from_secs(5))),
        ("2 layered-medium oracle", layered_medium, Some(Duration::from_secs(60))),
        ("3 time-average reduction", time_average, None),
        ("4 parabolic-elliptic equivalence", parabolic_elliptic, Some(Duration::from_secs(120))),
        ("5 cell-solver internals", cell_internals, None),
        ("6 macro heat-kernel oracle", heat_kernel, None),
        ("7 homogenization convergence study", convergence, Some(Duration::from_secs(900))),
        ("8 no-hole null study", null_study, None),
        ("9 determinism and round-trip", determinism_and_invariants, None),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_text = budget.map(|b| format!(" (budget {} s)", b.as_secs())).unwrap_or_default();
        println!(
            "{} criterion {name}: {} [{:.2} s{budget_text}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
