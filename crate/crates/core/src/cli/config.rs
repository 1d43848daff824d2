//! Flat `section.key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key is optional and
//! falls back to the default listed in [`RunConfig::default`]. Parsing
//! collects every violation instead of stopping at the first one.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use crate::cell_solver::steps_for_ds;
use crate::coefficients::{sym_min_eigenvalue, CoefficientFamily, CoefficientModel, Mat2, IDENTITY};
use crate::diagnostics::{CellFactor, PeriodicFactor, TimeFactor};
use crate::epsilon_solver::{MIN_CELL_RESOLUTION, TEMPORAL_RESOLUTION};
use crate::geometry::{Hole, UnitCell};
use crate::macro_solver::steps_for;
use crate::source::ClosedForm;

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", lines.join("; "))
    }
}

impl std::error::Error for ConfigError {}

/// Coefficient source: an analytic family or a table file.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Analytic(CoefficientFamily),
    Table(PathBuf),
}

/// Spatial data: a closed-form expression or a field dump.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Closed(ClosedForm),
    File(PathBuf),
}

impl fmt::Display for DataSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSpec::Closed(c) => write!(f, "{c}"),
            DataSpec::File(p) => write!(f, "file {}", p.display()),
        }
    }
}

/// Effective tensor of the `macro` run: from a cell solve or prescribed.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorSpec {
    Cell,
    Prescribed { b: Mat2, mu: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSection {
    pub n: usize,
    pub steps_per_period: usize,
    pub tol_period: f64,
    pub max_periods: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroSection {
    pub n: usize,
    pub t_final: f64,
    pub steps: usize,
    pub f: DataSpec,
    pub u0: DataSpec,
    pub tensor: TensorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectSection {
    /// Cells per side `k` for each `ε = 1/k`, strictly increasing.
    pub cells: Vec<usize>,
    pub m: usize,
    pub steps_per_period: usize,
}

impl DirectSection {
    pub fn epsilons(&self) -> Vec<f64> {
        self.cells.iter().map(|&k| 1.0 / k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSection {
    pub v1: ClosedForm,
    pub c1: TimeFactor,
    pub v2: CellFactor,
    pub c2: PeriodicFactor,
    pub very_weak_v2: CellFactor,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub dumps: bool,
    pub every: usize,
    pub vtk: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hole: Hole,
    pub coefficient: CoefficientSpec,
    pub cell: CellSection,
    pub macroscale: MacroSection,
    pub direct: DirectSection,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
    pub seed: u64,
    pub samples: usize,
    pub linear_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hole: Hole::None,
            coefficient: CoefficientSpec::Analytic(CoefficientFamily::Constant { matrix: IDENTITY }),
            cell: CellSection {
                n: 64,
                steps_per_period: 64,
                tol_period: 1e-9,
                max_periods: 200,
            },
            macroscale: MacroSection {
                n: 64,
                t_final: 0.05,
                steps: 256,
                f: DataSpec::Closed(ClosedForm::zero()),
                u0: DataSpec::Closed(ClosedForm::sin_product(1.0, 1, 1)),
                tensor: TensorSpec::Cell,
            },
            direct: DirectSection {
                cells: vec![4, 8, 16],
                m: 8,
                steps_per_period: 16,
            },
            diagnostics: DiagnosticsSection {
                v1: ClosedForm::sin_product(1.0, 1, 1),
                c1: TimeFactor::Bump,
                v2: "const 1 + cos 1 0 0.5".parse().expect("valid default"),
                c2: "const 1 + cos 1 0.5".parse().expect("valid default"),
                very_weak_v2: crate::diagnostics::default_very_weak_v2(),
                r: 2.0,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                dumps: false,
                every: 1,
                vtk: false,
            },
            seed: 1,
            samples: 100_000,
            linear_tol: 1e-12,
        }
    }
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "geometry.hole",
    "geometry.center",
    "geometry.radius",
    "coefficient.family",
    "coefficient.matrix",
    "coefficient.c0",
    "coefficient.c1",
    "coefficient.trig",
    "coefficient.table",
    "cell.n",
    "cell.ds",
    "cell.tol_period",
    "cell.max_periods",
    "macro.n",
    "macro.t_final",
    "macro.dt",
    "macro.f",
    "macro.u0",
    "macro.tensor",
    "macro.mu",
    "direct.epsilon",
    "direct.m",
    "direct.steps_per_period",
    "diagnostics.v1",
    "diagnostics.c1",
    "diagnostics.v2",
    "diagnostics.c2",
    "diagnostics.very_weak_v2",
    "diagnostics.r",
    "output.dir",
    "output.dumps",
    "output.every",
    "output.vtk",
    "sampling.seed",
    "sampling.samples",
    "linear.tol",
];

/// A real number, also accepting `a/b`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("not a number: '{s}'"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("not a number: '{s}'"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: '{s}'"))
    }
}

fn parse_reals<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s.split_whitespace().map(parse_real).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} numbers, got {}", v.len()))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn parse_data(s: &str) -> Result<DataSpec, String> {
    match s.strip_prefix("file ") {
        Some(p) if !p.trim().is_empty() => Ok(DataSpec::File(PathBuf::from(p.trim()))),
        _ => s.parse().map(DataSpec::Closed),
    }
}

/// `1/k` for an integer `k ≥ 2`.
fn parse_epsilon(s: &str) -> Result<usize, String> {
    let v = parse_real(s)?;
    let inv = 1.0 / v;
    let k = inv.round();
    if !(v > 0.0) || k < 2.0 || (inv - k).abs() > 1e-9 * k {
        return Err(format!("ε must be 1/k for an integer k >= 2, got {s}"));
    }
    Ok(k as usize)
}

struct Reader {
    entries: HashMap<String, (usize, String)>,
    issues: Vec<Issue>,
}

impl Reader {
    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.0)
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn fail(&mut self, key: &str, message: String) {
        let line = self.line(key);
        self.issues.push(Issue {
            line,
            message: format!("{key}: {message}"),
        });
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        let Some((line, raw)) = self.entries.get(key).cloned() else {
            return default;
        };
        match parse(&raw) {
            Ok(v) => v,
            Err(m) => {
                self.issues.push(Issue {
                    line: Some(line),
                    message: format!("{key}: {m}"),
                });
                default
            }
        }
    }

    fn check(&mut self, key: &str, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.fail(key, message());
        }
    }
}

fn tokenize(text: &str) -> (HashMap<String, (usize, String)>, Vec<Issue>) {
    let mut entries = HashMap::new();
    let mut issues = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            issues.push(Issue {
                line: Some(line),
                message: format!("expected 'key = value', got '{content}'"),
            });
            continue;
        };
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if !KEYS.contains(&key.as_str()) {
            issues.push(Issue {
                line: Some(line),
                message: format!("unknown key '{key}'"),
            });
            continue;
        }
        if let Some((first, _)) = entries.get(&key) {
            issues.push(Issue {
                line: Some(line),
                message: format!("duplicate key '{key}' (first set on line {first})"),
            });
            continue;
        }
        entries.insert(key, (line, value));
    }
    (entries, issues)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let (entries, issues) = tokenize(text);
    let mut r = Reader { entries, issues };
    let d = RunConfig::default();

    let hole_kind = r.get("geometry.hole", "none".to_string(), |s| match s {
        "none" | "disk" => Ok(s.to_string()),
        _ => Err(format!("expected none or disk, got '{s}'")),
    });
    let center = r.get("geometry.center", [0.5, 0.5], parse_reals::<2>);
    let radius = r.get("geometry.radius", 0.25, parse_real);
    let hole = if hole_kind == "disk" {
        let h = Hole::Disk { center, radius };
        if let Err(e) = UnitCell::new(h) {
            let key = if r.has("geometry.radius") { "geometry.radius" } else { "geometry.center" };
            r.fail(key, e.to_string());
        }
        h
    } else {
        for key in ["geometry.center", "geometry.radius"] {
            r.check(key, !r.has(key), || "only used with geometry.hole = disk".into());
        }
        Hole::None
    };

    let family = r.get("coefficient.family", "constant".to_string(), |s| match s {
        "constant" | "separable_time" | "layered_x" | "trig" | "tabulated" => Ok(s.to_string()),
        _ => Err(format!("expected constant, separable_time, layered_x, trig or tabulated, got '{s}'")),
    });
    let matrix = r.get("coefficient.matrix", [1.0, 0.0, 0.0, 1.0], parse_reals::<4>);
    let matrix = [[matrix[0], matrix[1]], [matrix[2], matrix[3]]];
    let c0 = r.get("coefficient.c0", 2.0, parse_real);
    let c1 = r.get("coefficient.c1", 1.0, parse_real);
    let trig = r.get(
        "coefficient.trig",
        [2.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.5, 0.0, 0.5],
        parse_reals::<16>,
    );
    let table = r.get("coefficient.table", None, |s| Ok(Some(PathBuf::from(s))));
    let coefficient = match family.as_str() {
        "tabulated" => match table {
            Some(p) => CoefficientSpec::Table(p),
            None => {
                r.fail("coefficient.family", "tabulated family needs coefficient.table".into());
                d.coefficient.clone()
            }
        },
        other => {
            r.check("coefficient.table", table.is_none(), || {
                "only used with coefficient.family = tabulated".into()
            });
            let fam = match other {
                "separable_time" => CoefficientFamily::SeparableTime { base: matrix, c0, c1 },
                "layered_x" => CoefficientFamily::LayeredX { c0, c1 },
                "trig" => {
                    let e = |k: usize| [trig[4 * k], trig[4 * k + 1], trig[4 * k + 2], trig[4 * k + 3]];
                    CoefficientFamily::TrigGeneral {
                        coeffs: [[e(0), e(1)], [e(2), e(3)]],
                    }
                }
                _ => CoefficientFamily::Constant { matrix },
            };
            if let Err(e) = CoefficientModel::new(fam.clone()) {
                r.fail("coefficient.family", e.to_string());
            }
            CoefficientSpec::Analytic(fam)
        }
    };

    let cell_n = r.get("cell.n", d.cell.n, parse_count);
    r.check("cell.n", cell_n >= 2, || format!("cell grid needs n >= 2, got {cell_n}"));
    let cell_steps = r.get("cell.ds", d.cell.steps_per_period, |s| {
        steps_for_ds(parse_real(s)?).map_err(|e| e.to_string())
    });
    let tol_period = r.get("cell.tol_period", d.cell.tol_period, parse_real);
    r.check("cell.tol_period", tol_period > 0.0, || format!("must be positive, got {tol_period}"));
    let max_periods = r.get("cell.max_periods", d.cell.max_periods, parse_count);
    r.check("cell.max_periods", max_periods >= 1, || "must be at least 1".into());

    let macro_n = r.get("macro.n", d.macroscale.n, parse_count);
    r.check("macro.n", macro_n >= 2, || format!("grid needs n >= 2, got {macro_n}"));
    let t_final = r.get("macro.t_final", d.macroscale.t_final, parse_real);
    r.check("macro.t_final", t_final > 0.0, || format!("final time must be positive, got {t_final}"));
    let dt = r.get("macro.dt", d.macroscale.t_final / d.macroscale.steps as f64, parse_real);
    let steps = if r.has("macro.dt") || r.has("macro.t_final") {
        match steps_for(t_final, dt) {
            Ok(k) => k,
            Err(m) => {
                r.fail("macro.dt", m);
                1
            }
        }
    } else {
        d.macroscale.steps
    };
    let f = r.get("macro.f", d.macroscale.f.clone(), parse_data);
    let u0 = r.get("macro.u0", d.macroscale.u0.clone(), parse_data);
    let tensor_b = r.get("macro.tensor", None, |s| match s {
        "cell" => Ok(None),
        _ => parse_reals::<4>(s).map(|b| Some([[b[0], b[1]], [b[2], b[3]]])),
    });
    let mu = r.get("macro.mu", 1.0, parse_real);
    let tensor = match tensor_b {
        Some(b) => {
            let lam = sym_min_eigenvalue(&b);
            r.check("macro.tensor", lam > 0.0, || {
                format!("effective tensor not coercive: smallest symmetric eigenvalue {lam:e}")
            });
            r.check("macro.mu", mu > 0.0 && mu <= 1.0, || format!("porosity must lie in (0, 1], got {mu}"));
            TensorSpec::Prescribed { b, mu }
        }
        None => {
            r.check("macro.mu", !r.has("macro.mu"), || "only used with a prescribed macro.tensor".into());
            TensorSpec::Cell
        }
    };

    let cells = r.get("direct.epsilon", d.direct.cells.clone(), |s| {
        let v: Vec<usize> = s.split_whitespace().map(parse_epsilon).collect::<Result<_, _>>()?;
        if v.is_empty() {
            return Err("needs at least one ε".into());
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err("ε list must be strictly decreasing".into());
        }
        Ok(v)
    });
    let m = r.get("direct.m", d.direct.m, parse_count);
    r.check("direct.m", m >= MIN_CELL_RESOLUTION, || {
        format!("need at least {MIN_CELL_RESOLUTION} grid cells per ε-cell, got {m}")
    });
    let direct_steps = r.get("direct.steps_per_period", d.direct.steps_per_period, parse_count);
    r.check("direct.steps_per_period", direct_steps as f64 >= TEMPORAL_RESOLUTION, || {
        format!("dt must satisfy dt <= ε²/{TEMPORAL_RESOLUTION}, got {direct_steps} steps per period")
    });

    let dg = &d.diagnostics;
    let v1 = r.get("diagnostics.v1", dg.v1.clone(), |s| s.parse());
    let c1 = r.get("diagnostics.c1", dg.c1, |s| s.parse());
    let v2 = r.get("diagnostics.v2", dg.v2.clone(), |s| s.parse());
    let c2 = r.get("diagnostics.c2", dg.c2.clone(), |s| s.parse());
    let very_weak_v2 = r.get("diagnostics.very_weak_v2", dg.very_weak_v2.clone(), |s| s.parse());
    let rr = r.get("diagnostics.r", dg.r, parse_real);
    r.check("diagnostics.r", rr > 0.0, || format!("must be positive, got {rr}"));

    let dir = r.get("output.dir", d.output.dir.clone(), |s| Ok(PathBuf::from(s)));
    let dumps = r.get("output.dumps", d.output.dumps, parse_bool);
    let every = r.get("output.every", d.output.every, parse_count);
    r.check("output.every", every >= 1, || "must be at least 1".into());
    let vtk = r.get("output.vtk", d.output.vtk, parse_bool);
    let seed = r.get("sampling.seed", d.seed, |s| s.parse().map_err(|_| format!("bad seed '{s}'")));
    let samples = r.get("sampling.samples", d.samples, parse_count);
    r.check("sampling.samples", samples >= 1, || "must be at least 1".into());
    let linear_tol = r.get("linear.tol", d.linear_tol, parse_real);
    r.check("linear.tol", linear_tol > 0.0 && linear_tol < 1.0, || format!("must lie in (0, 1), got {linear_tol}"));

    if !r.issues.is_empty() {
        let mut issues = r.issues;
        issues.sort_by_key(|i| i.line.unwrap_or(0));
        return Err(ConfigError { issues });
    }
    Ok(RunConfig {
        hole,
        coefficient,
        cell: CellSection {
            n: cell_n,
            steps_per_period: cell_steps,
            tol_period,
            max_periods,
        },
        macroscale: MacroSection {
            n: macro_n,
            t_final,
            steps,
            f,
            u0,
            tensor,
        },
        direct: DirectSection {
            cells,
            m,
            steps_per_period: direct_steps,
        },
        diagnostics: DiagnosticsSection {
            v1,
            c1,
            v2,
            c2,
            very_weak_v2,
            r: rr,
        },
        output: OutputSection { dir, dumps, every, vtk },
        seed,
        samples,
        linear_tol,
    })
}

fn mat(m: &Mat2) -> String {
    format!("{:?} {:?} {:?} {:?}", m[0][0], m[0][1], m[1][0], m[1][1])
}

impl RunConfig {
    pub fn cell(&self) -> UnitCell {
        UnitCell::new(self.hole).expect("validated at parse time")
    }

    /// Canonical text form; parsing it gives back the same config.
    pub fn to_text(&self) -> String {
        let mut lines: Vec<String> = Vec::new();
        let mut kv = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        match self.hole {
            Hole::None => kv("geometry.hole", "none".into()),
            Hole::Disk { center, radius } => {
                kv("geometry.hole", "disk".into());
                kv("geometry.center", format!("{:?} {:?}", center[0], center[1]));
                kv("geometry.radius", format!("{radius:?}"));
            }
        }
        match &self.coefficient {
            CoefficientSpec::Table(p) => {
                kv("coefficient.family", "tabulated".into());
                kv("coefficient.table", p.display().to_string());
            }
            CoefficientSpec::Analytic(fam) => match fam {
                CoefficientFamily::Constant { matrix } => {
                    kv("coefficient.family", "constant".into());
                    kv("coefficient.matrix", mat(matrix));
                }
                CoefficientFamily::SeparableTime { base, c0, c1 } => {
                    kv("coefficient.family", "separable_time".into());
                    kv("coefficient.matrix", mat(base));
                    kv("coefficient.c0", format!("{c0:?}"));
                    kv("coefficient.c1", format!("{c1:?}"));
                }
                CoefficientFamily::LayeredX { c0, c1 } => {
                    kv("coefficient.family", "layered_x".into());
                    kv("coefficient.c0", format!("{c0:?}"));
                    kv("coefficient.c1", format!("{c1:?}"));
                }
                CoefficientFamily::TrigGeneral { coeffs } => {
                    kv("coefficient.family", "trig".into());
                    let flat: Vec<String> = coeffs.iter().flatten().flatten().map(|v| format!("{v:?}")).collect();
                    kv("coefficient.trig", flat.join(" "));
                }
                CoefficientFamily::Tabulated(_) => unreachable!("tables are referenced by path"),
            },
        }
        kv("cell.n", self.cell.n.to_string());
        kv("cell.ds", format!("1/{}", self.cell.steps_per_period));
        kv("cell.tol_period", format!("{:?}", self.cell.tol_period));
        kv("cell.max_periods", self.cell.max_periods.to_string());
        let mc = &self.macroscale;
        kv("macro.n", mc.n.to_string());
        kv("macro.t_final", format!("{:?}", mc.t_final));
        kv("macro.dt", format!("{:?}/{}", mc.t_final, mc.steps));
        kv("macro.f", mc.f.to_string());
        kv("macro.u0", mc.u0.to_string());
        match &mc.tensor {
            TensorSpec::Cell => kv("macro.tensor", "cell".into()),
            TensorSpec::Prescribed { b, mu } => {
                kv("macro.tensor", mat(b));
                kv("macro.mu", format!("{mu:?}"));
            }
        }
        let eps: Vec<String> = self.direct.cells.iter().map(|k| format!("1/{k}")).collect();
        kv("direct.epsilon", eps.join(" "));
        kv("direct.m", self.direct.m.to_string());
        kv("direct.steps_per_period", self.direct.steps_per_period.to_string());
        let dg = &self.diagnostics;
        kv("diagnostics.v1", dg.v1.to_string());
        kv("diagnostics.c1", dg.c1.to_string());
        kv("diagnostics.v2", dg.v2.to_string());
        kv("diagnostics.c2", dg.c2.to_string());
        kv("diagnostics.very_weak_v2", dg.very_weak_v2.to_string());
        kv("diagnostics.r", format!("{:?}", dg.r));
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.dumps", self.output.dumps.to_string());
        kv("output.every", self.output.every.to_string());
        kv("output.vtk", self.output.vtk.to_string());
        kv("sampling.seed", self.seed.to_string());
        kv("sampling.samples", self.samples.to_string());
        kv("linear.tol", format!("{:?}", self.linear_tol));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}
