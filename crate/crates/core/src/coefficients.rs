//! Oscillating coefficient fields `A(y, s)`, Y-periodic in `y` and 1-periodic
//! in `s`, with a sampled coercivity check.

use std::f64::consts::PI;
use thiserror::Error;

use crate::geometry::wrap_unit;

/// Row-major 2×2 matrix, `m[i][j] = A_ij`.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Lattice resolution per axis used by [`verify_coercivity`].
pub const COERCIVITY_LATTICE: usize = 32;
/// Smallest admissible sampled coercivity constant.
pub const COERCIVITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("coefficient not coercive: symmetric-part eigenvalue {value:e} at y = ({y0}, {y1}), s = {s}", y0 = y[0], y1 = y[1])]
    NotCoercive { value: f64, y: [f64; 2], s: f64 },
    #[error("invalid coefficient family: {0}")]
    Invalid(String),
}

pub fn scale(a: f64, m: &Mat2) -> Mat2 {
    [[a * m[0][0], a * m[0][1]], [a * m[1][0], a * m[1][1]]]
}

/// Smallest eigenvalue of `(M + Mᵀ)/2`.
pub fn sym_min_eigenvalue(m: &Mat2) -> f64 {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    mean - rad
}

fn trig_entry(c: &[f64; 4], y: [f64; 2], s: f64) -> f64 {
    c[0] + c[1] * (2.0 * PI * y[0]).sin() + c[2] * (2.0 * PI * y[1]).cos() + c[3] * (2.0 * PI * s).cos()
}

/// `A` sampled on a `(ny+1)² × ns` lattice in `(y₁, y₂, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    ny: usize,
    ns: usize,
    /// Entry `(i, j, k)` at `i + (ny+1)·j + (ny+1)²·k`.
    samples: Vec<Mat2>,
}

impl CoefficientTable {
    /// Nodes `y = (i/ny, j/ny)`, `i, j = 0..=ny`, times `s = k/ns`, `k = 0..ns`.
    /// The `y = 1` faces must repeat the `y = 0` faces.
    pub fn new(ny: usize, ns: usize, samples: Vec<Mat2>) -> Result<Self, CoefficientError> {
        if ny == 0 || ns == 0 {
            return Err(CoefficientError::Invalid("table needs ny >= 1 and ns >= 1".into()));
        }
        let side = ny + 1;
        if samples.len() != side * side * ns {
            return Err(CoefficientError::Invalid(format!(
                "table expects {} samples, got {}",
                side * side * ns,
                samples.len()
            )));
        }
        if samples.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(CoefficientError::Invalid("table contains non-finite entries".into()));
        }
        let table = Self { ny, ns, samples };
        for k in 0..ns {
            for t in 0..=ny {
                let pairs = [((0, t), (ny, t)), ((t, 0), (t, ny))];
                for ((i0, j0), (i1, j1)) in pairs {
                    let a = table.sample(i0, j0, k);
                    let b = table.sample(i1, j1, k);
                    let gap = (0..4).map(|e| (a[e / 2][e % 2] - b[e / 2][e % 2]).abs()).fold(0.0, f64::max);
                    if gap > 1e-12 {
                        return Err(CoefficientError::Invalid(format!(
                            "table is not Y-periodic: node ({i0},{j0}) and ({i1},{j1}) differ at s-index {k}"
                        )));
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn samples(&self) -> &[Mat2] {
        &self.samples
    }

    pub fn sample(&self, i: usize, j: usize, k: usize) -> &Mat2 {
        let side = self.ny + 1;
        &self.samples[i + side * j + side * side * k]
    }

    fn eval(&self, y: [f64; 2], s: f64) -> Mat2 {
        let locate = |v: f64, n: usize| {
            let t = wrap_unit(v) * n as f64;
            let i = (t.floor() as usize).min(n - 1);
            (i, t - i as f64)
        };
        let (i, fx) = locate(y[0], self.ny);
        let (j, fy) = locate(y[1], self.ny);
        let (k, fs) = locate(s, self.ns);
        let k1 = (k + 1) % self.ns;
        let mut out = [[0.0; 2]; 2];
        for (kk, ws) in [(k, 1.0 - fs), (k1, fs)] {
            for (jj, wy) in [(j, 1.0 - fy), (j + 1, fy)] {
                for (ii, wx) in [(i, 1.0 - fx), (i + 1, fx)] {
                    let w = ws * wy * wx;
                    if w == 0.0 {
                        continue;
                    }
                    let a = self.sample(ii, jj, kk);
                    for r in 0..2 {
                        for c in 0..2 {
                            out[r][c] += w * a[r][c];
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientFamily {
    Constant { matrix: Mat2 },
    /// `A = (c₀ + c₁ cos 2πs)·base`.
    SeparableTime { base: Mat2, c0: f64, c1: f64 },
    /// `A = (c₀ + c₁ sin 2πy₁)·I`.
    LayeredX { c0: f64, c1: f64 },
    /// `A_ij = c⁰_ij + c¹_ij sin 2πy₁ + c²_ij cos 2πy₂ + c³_ij cos 2πs`;
    /// `coeffs[i][j] = [c⁰, c¹, c², c³]`.
    TrigGeneral { coeffs: [[[f64; 4]; 2]; 2] },
    Tabulated(CoefficientTable),
}

impl CoefficientFamily {
    /// `(2 + 0.5 sin 2πy₁ + 0.5 cos 2πs)·I` style scalar trig coefficient.
    pub fn scalar_trig(c0: f64, c_sin_y1: f64, c_cos_y2: f64, c_cos_s: f64) -> Self {
        let d = [c0, c_sin_y1, c_cos_y2, c_cos_s];
        CoefficientFamily::TrigGeneral {
            coeffs: [[d, [0.0; 4]], [[0.0; 4], d]],
        }
    }

    pub fn eval(&self, y: [f64; 2], s: f64) -> Mat2 {
        match self {
            CoefficientFamily::Constant { matrix } => *matrix,
            CoefficientFamily::SeparableTime { base, c0, c1 } => {
                scale(c0 + c1 * (2.0 * PI * wrap_unit(s)).cos(), base)
            }
            CoefficientFamily::LayeredX { c0, c1 } => {
                scale(c0 + c1 * (2.0 * PI * wrap_unit(y[0])).sin(), &IDENTITY)
            }
            CoefficientFamily::TrigGeneral { coeffs } => {
                let y = [wrap_unit(y[0]), wrap_unit(y[1])];
                let s = wrap_unit(s);
                [
                    [trig_entry(&coeffs[0][0], y, s), trig_entry(&coeffs[0][1], y, s)],
                    [trig_entry(&coeffs[1][0], y, s), trig_entry(&coeffs[1][1], y, s)],
                ]
            }
            CoefficientFamily::Tabulated(table) => table.eval(y, s),
        }
    }

    fn validate(&self) -> Result<(), CoefficientError> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            CoefficientFamily::Constant { matrix } if !finite(matrix.as_flattened()) => {
                Err(CoefficientError::Invalid("non-finite matrix".into()))
            }
            CoefficientFamily::SeparableTime { base, c0, c1 } => {
                if !finite(base.as_flattened()) || !finite(&[*c0, *c1]) || *c0 <= c1.abs() {
                    Err(CoefficientError::Invalid(format!(
                        "separable time factor needs c0 > |c1|, got c0 = {c0}, c1 = {c1}"
                    )))
                } else {
                    Ok(())
                }
            }
            CoefficientFamily::LayeredX { c0, c1 } => {
                if !finite(&[*c0, *c1]) || *c0 <= c1.abs() {
                    Err(CoefficientError::Invalid(format!(
                        "layered coefficient needs c0 > |c1|, got c0 = {c0}, c1 = {c1}"
                    )))
                } else {
                    Ok(())
                }
            }
            CoefficientFamily::TrigGeneral { coeffs } if !finite(coeffs.as_flattened().as_flattened()) => {
                Err(CoefficientError::Invalid("non-finite trig coefficients".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether `A(y, s)` is symmetric for every `(y, s)`.
    pub fn is_symmetric(&self) -> bool {
        let sym = |m: &Mat2| m[0][1] == m[1][0];
        match self {
            CoefficientFamily::Constant { matrix } => sym(matrix),
            CoefficientFamily::SeparableTime { base, .. } => sym(base),
            CoefficientFamily::LayeredX { .. } => true,
            CoefficientFamily::TrigGeneral { coeffs } => coeffs[0][1] == coeffs[1][0],
            CoefficientFamily::Tabulated(t) => t.samples.iter().all(sym),
        }
    }

    /// Whether `A` does not depend on `s`.
    pub fn is_time_independent(&self) -> bool {
        match self {
            CoefficientFamily::Constant { .. } | CoefficientFamily::LayeredX { .. } => true,
            CoefficientFamily::SeparableTime { c1, .. } => *c1 == 0.0,
            CoefficientFamily::TrigGeneral { coeffs } => coeffs.iter().flatten().all(|c| c[3] == 0.0),
            CoefficientFamily::Tabulated(t) => {
                let side = (t.ny + 1) * (t.ny + 1);
                (1..t.ns).all(|k| t.samples[k * side..(k + 1) * side] == t.samples[..side])
            }
        }
    }

    /// Whether `A` does not depend on `y`.
    pub fn is_space_independent(&self) -> bool {
        match self {
            CoefficientFamily::Constant { .. } | CoefficientFamily::SeparableTime { .. } => true,
            CoefficientFamily::LayeredX { c1, .. } => *c1 == 0.0,
            CoefficientFamily::TrigGeneral { coeffs } => coeffs.iter().flatten().all(|c| c[1] == 0.0 && c[2] == 0.0),
            CoefficientFamily::Tabulated(t) => {
                let side = (t.ny + 1) * (t.ny + 1);
                (0..t.ns).all(|k| {
                    let block = &t.samples[k * side..(k + 1) * side];
                    block.iter().all(|m| *m == block[0])
                })
            }
        }
    }
}

/// Minimum sampled eigenvalue of the symmetric part of `A` over the
/// `32 × 32 × 32` lattice in `(y₁, y₂, s)`.
pub fn verify_coercivity(family: &CoefficientFamily) -> Result<f64, CoefficientError> {
    let n = COERCIVITY_LATTICE;
    let mut worst = (f64::INFINITY, [0.0, 0.0], 0.0);
    for k in 0..n {
        let s = k as f64 / n as f64;
        for j in 0..n {
            for i in 0..n {
                let y = [i as f64 / n as f64, j as f64 / n as f64];
                let lam = sym_min_eigenvalue(&family.eval(y, s));
                if !(lam >= worst.0) {
                    worst = (lam, y, s);
                }
            }
        }
    }
    let (value, y, s) = worst;
    if !(value > COERCIVITY_FLOOR) {
        return Err(CoefficientError::NotCoercive { value, y, s });
    }
    Ok(value)
}

/// A validated coefficient family together with its sampled coercivity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    family: CoefficientFamily,
    alpha: f64,
}

impl CoefficientModel {
    pub fn new(family: CoefficientFamily) -> Result<Self, CoefficientError> {
        family.validate()?;
        let alpha = verify_coercivity(&family)?;
        Ok(Self { family, alpha })
    }

    pub fn constant(matrix: Mat2) -> Result<Self, CoefficientError> {
        Self::new(CoefficientFamily::Constant { matrix })
    }

    pub fn identity() -> Self {
        Self::constant(IDENTITY).expect("identity is coercive")
    }

    pub fn family(&self) -> &CoefficientFamily {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `A` at `(y mod 1, s mod 1)`.
    pub fn eval_a(&self, y: [f64; 2], s: f64) -> Mat2 {
        self.family.eval(y, s)
    }

    pub fn is_symmetric(&self) -> bool {
        self.family.is_symmetric()
    }

    pub fn is_time_independent(&self) -> bool {
        self.family.is_time_independent()
    }

    pub fn is_space_independent(&self) -> bool {
        self.family.is_space_independent()
    }
}
