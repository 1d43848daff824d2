//! Text formats: field dumps, coefficient tables, legacy VTK and CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::coefficients::{CoefficientTable, Mat2};
use crate::discretization::{BoundaryMode, DofMap, Field, Grid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| IoError::File {
                path: dir.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

/// 17 significant digits, enough to reproduce every `f64` exactly.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Node values `(n+1)²` in row-major order (`i` fastest), zero on
/// constrained and inactive nodes.
pub fn node_values(field: &Field) -> Vec<f64> {
    let n = field.dofmap().grid().n();
    let mut out = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            out.push(field.node_value(i, j));
        }
    }
    out
}

/// A parsed field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n: usize,
    pub mode: BoundaryMode,
    pub t: f64,
    pub values: Vec<f64>,
}

impl FieldDump {
    /// The dump as a field on the full square with every node free.
    pub fn to_field(&self) -> Result<Field, IoError> {
        let grid = Grid::new(self.n).map_err(|e| parse_err(1, e.to_string()))?;
        let dofmap = Arc::new(DofMap::full(grid, BoundaryMode::FreeSquare));
        let mut values = vec![0.0; dofmap.n_equations()];
        let side = self.n + 1;
        for (e, v) in values.iter_mut().enumerate() {
            let (i, j) = dofmap.equation_node(e);
            *v = self.values[i + side * j];
        }
        Field::new(dofmap, values).map_err(|e| parse_err(1, e.to_string()))
    }
}

pub fn format_field(field: &Field, t: f64) -> String {
    let d = field.dofmap();
    let mut s = format!("FIELD n={} mode={} t={}\n", d.grid().n(), d.mode().as_str(), fmt_real(t));
    for v in node_values(field) {
        s.push_str(&fmt_real(v));
        s.push('\n');
    }
    s
}

fn header_fields<'a>(line: &'a str, tag: &str, keys: &[&str]) -> Result<Vec<&'a str>, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(tag) {
        return Err(format!("expected header starting with {tag}"));
    }
    let pairs: Vec<(&str, &str)> = parts
        .map(|p| p.split_once('=').ok_or_else(|| format!("malformed header entry '{p}'")))
        .collect::<Result<_, _>>()?;
    keys.iter()
        .map(|k| {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| format!("header lacks {k}="))
        })
        .collect()
}

fn parse_values(body: &str, first_line: usize, expected: usize) -> Result<Vec<f64>, IoError> {
    let mut out = Vec::with_capacity(expected);
    for (k, line) in body.lines().enumerate() {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(first_line + k, format!("not a number: '{tok}'")))?;
            if !v.is_finite() {
                return Err(parse_err(first_line + k, "non-finite value"));
            }
            out.push(v);
        }
    }
    if out.len() != expected {
        return Err(parse_err(first_line, format!("expected {expected} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn parse_field(text: &str) -> Result<FieldDump, IoError> {
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let f = header_fields(head, "FIELD", &["n", "mode", "t"]).map_err(|m| parse_err(1, m))?;
    let n: usize = f[0].parse().map_err(|_| parse_err(1, format!("bad n '{}'", f[0])))?;
    if n == 0 {
        return Err(parse_err(1, "n must be positive"));
    }
    let mode = BoundaryMode::parse(f[1]).ok_or_else(|| parse_err(1, format!("unknown mode '{}'", f[1])))?;
    let t: f64 = f[2].parse().map_err(|_| parse_err(1, format!("bad t '{}'", f[2])))?;
    let values = parse_values(body, 2, (n + 1) * (n + 1))?;
    Ok(FieldDump { n, mode, t, values })
}

pub fn read_field(path: &Path) -> Result<FieldDump, IoError> {
    parse_field(&read_text(path)?)
}

pub fn write_field(path: &Path, field: &Field, t: f64) -> Result<(), IoError> {
    write_text(path, &format_field(field, t))
}

/// `COEFF ny= ns=` then `ns` blocks of `(ny+1)²` nodes, each `A11 A12 A21 A22`.
pub fn format_table(table: &CoefficientTable) -> String {
    let mut s = format!("COEFF ny={} ns={}\n", table.ny(), table.ns());
    for a in table.samples() {
        let _ = writeln!(
            s,
            "{} {} {} {}",
            fmt_real(a[0][0]),
            fmt_real(a[0][1]),
            fmt_real(a[1][0]),
            fmt_real(a[1][1])
        );
    }
    s
}

pub fn parse_table(text: &str) -> Result<CoefficientTable, IoError> {
    let (head, body) = text.split_once('\n').unwrap_or((text, ""));
    let f = header_fields(head, "COEFF", &["ny", "ns"]).map_err(|m| parse_err(1, m))?;
    let ny: usize = f[0].parse().map_err(|_| parse_err(1, format!("bad ny '{}'", f[0])))?;
    let ns: usize = f[1].parse().map_err(|_| parse_err(1, format!("bad ns '{}'", f[1])))?;
    let count = (ny + 1) * (ny + 1) * ns;
    let raw = parse_values(body, 2, 4 * count)?;
    let samples: Vec<Mat2> = raw.chunks_exact(4).map(|c| [[c[0], c[1]], [c[2], c[3]]]).collect();
    CoefficientTable::new(ny, ns, samples).map_err(|e| parse_err(1, e.to_string()))
}

pub fn read_table(path: &Path) -> Result<CoefficientTable, IoError> {
    parse_table(&read_text(path)?)
}

/// Legacy VTK `STRUCTURED_POINTS` file with one point scalar.
pub fn format_vtk(field: &Field, name: &str, t: f64) -> String {
    let grid = field.dofmap().grid();
    let (n, h) = (grid.n(), grid.h());
    let mut s = String::new();
    let _ = write!(
        s,
        "# vtk DataFile Version 3.0\n{name} t={}\nASCII\nDATASET STRUCTURED_POINTS\n\
         DIMENSIONS {side} {side} 1\nORIGIN 0 0 0\nSPACING {h} {h} 1\nPOINT_DATA {count}\n\
         SCALARS {name} double 1\nLOOKUP_TABLE default\n",
        fmt_real(t),
        side = n + 1,
        count = (n + 1) * (n + 1),
    );
    for v in node_values(field) {
        s.push_str(&fmt_real(v));
        s.push('\n');
    }
    s
}

pub fn write_vtk(path: &Path, field: &Field, name: &str, t: f64) -> Result<(), IoError> {
    write_text(path, &format_vtk(field, name, t))
}

/// Comma-separated table with a header row.
pub fn format_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
