//! Data for the macroscopic and fine-scale problems: right-hand sides and
//! initial values, either from a small closed-form catalog or sampled fields.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::discretization::{DiscretizationError, DofMap, Field, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    Constant(f64),
    /// `amplitude · sin(k₁πx₁) sin(k₂πx₂)`.
    SinProduct { amplitude: f64, k1: u32, k2: u32 },
}

impl Term {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            Term::Constant(c) => c,
            Term::SinProduct { amplitude, k1, k2 } => {
                amplitude * (k1 as f64 * PI * x[0]).sin() * (k2 as f64 * PI * x[1]).sin()
            }
        }
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Term::Constant(_) => [0.0; 2],
            Term::SinProduct { amplitude, k1, k2 } => {
                let (a, b) = (k1 as f64 * PI, k2 as f64 * PI);
                [
                    amplitude * a * (a * x[0]).cos() * (b * x[1]).sin(),
                    amplitude * b * (a * x[0]).sin() * (b * x[1]).cos(),
                ]
            }
        }
    }

    /// Exact integral over the unit square.
    pub fn integral(&self) -> f64 {
        match *self {
            Term::Constant(c) => c,
            Term::SinProduct { amplitude, k1, k2 } => {
                let one = |k: u32| (1.0 - (k as f64 * PI).cos()) / (k as f64 * PI);
                if k1 == 0 || k2 == 0 {
                    0.0
                } else {
                    amplitude * one(k1) * one(k2)
                }
            }
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match *self {
            Term::Constant(c) => Term::Constant(s * c),
            Term::SinProduct { amplitude, k1, k2 } => Term::SinProduct {
                amplitude: s * amplitude,
                k1,
                k2,
            },
        }
    }
}

/// A finite sum of catalog terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    terms: Vec<Term>,
}

impl ClosedForm {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Term::Constant(c)])
    }

    pub fn sin_product(amplitude: f64, k1: u32, k2: u32) -> Self {
        Self::new(vec![Term::SinProduct { amplitude, k1, k2 }])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match *t {
            Term::Constant(c) => c == 0.0,
            Term::SinProduct { amplitude, k1, k2 } => amplitude == 0.0 || k1 == 0 || k2 == 0,
        })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.terms.iter().fold([0.0; 2], |acc, t| {
            let g = t.gradient(x);
            [acc[0] + g[0], acc[1] + g[1]]
        })
    }

    pub fn integral(&self) -> f64 {
        self.terms.iter().map(Term::integral).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.terms.iter().map(|t| t.scaled(s)).collect())
    }
}

impl fmt::Display for ClosedForm {
    /// `const <c>` and `sin <k1> <k2> <amplitude>` joined by ` + `; `zero` for
    /// the empty sum.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "zero");
        }
        for (idx, t) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            match t {
                Term::Constant(c) => write!(f, "const {c:?}")?,
                Term::SinProduct { amplitude, k1, k2 } => write!(f, "sin {k1} {k2} {amplitude:?}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for ClosedForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "zero" || s == "0" {
            return Ok(Self::zero());
        }
        let mut terms = Vec::new();
        for part in split_terms(s) {
            let tok: Vec<&str> = part.split_whitespace().collect();
            let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number '{t}' in '{s}'"));
            let int = |t: &str| t.parse::<u32>().map_err(|_| format!("bad wave number '{t}' in '{s}'"));
            let term = match tok.as_slice() {
                ["const", c] => Term::Constant(num(c)?),
                ["sin", k1, k2] => Term::SinProduct {
                    amplitude: 1.0,
                    k1: int(k1)?,
                    k2: int(k2)?,
                },
                ["sin", k1, k2, a] => Term::SinProduct {
                    amplitude: num(a)?,
                    k1: int(k1)?,
                    k2: int(k2)?,
                },
                [c] => Term::Constant(num(c)?),
                _ => return Err(format!("cannot parse expression '{s}'")),
            };
            let (Term::Constant(c) | Term::SinProduct { amplitude: c, .. }) = term;
            if !c.is_finite() {
                return Err(format!("non-finite coefficient in '{s}'"));
            }
            terms.push(term);
        }
        Ok(Self::new(terms))
    }
}

/// Split `a + b + c` on `+` signs that are not part of an exponent.
pub(crate) fn split_terms(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut prev = ' ';
    for (i, c) in s.char_indices() {
        if c == '+' && !matches!(prev, 'e' | 'E') {
            parts.push(&s[start..i]);
            start = i + 1;
        }
        prev = c;
    }
    parts.push(&s[start..]);
    parts
}

/// Time-independent spatial data.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Closed(ClosedForm),
    Sampled(Field),
}

impl SourceTerm {
    pub fn zero() -> Self {
        SourceTerm::Closed(ClosedForm::zero())
    }

    /// Nodal values on `dofmap` (sampled fields are interpolated bilinearly).
    pub fn nodal_values(&self, dofmap: &Arc<DofMap>) -> Result<Vec<f64>, DiscretizationError> {
        match self {
            SourceTerm::Closed(expr) => Ok(Field::from_fn(dofmap.clone(), |x| expr.eval(x)).into_values()),
            SourceTerm::Sampled(field) => sample_onto(field, dofmap),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            SourceTerm::Closed(expr) => SourceTerm::Closed(expr.scaled(s)),
            SourceTerm::Sampled(field) => {
                let values = field.values().iter().map(|v| s * v).collect();
                SourceTerm::Sampled(Field::new(field.dofmap().clone(), values).expect("same shape"))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SourceTerm::Closed(expr) => expr.is_zero(),
            SourceTerm::Sampled(field) => field.values().iter().all(|&v| v == 0.0),
        }
    }
}

fn sample_onto(field: &Field, dofmap: &Arc<DofMap>) -> Result<Vec<f64>, DiscretizationError> {
    if field.dofmap() == dofmap {
        return Ok(field.values().to_vec());
    }
    let grid = dofmap.grid();
    (0..dofmap.n_equations())
        .map(|e| {
            let (i, j) = dofmap.equation_node(e);
            field.evaluate(grid.node_coord(i, j))
        })
        .collect()
}

/// Right-hand side `f(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Steady(SourceTerm),
    /// One frame per time level `t_0, …, t_M` of the run.
    Frames(SpaceTimeField),
}

impl Forcing {
    pub fn zero() -> Self {
        Forcing::Steady(SourceTerm::zero())
    }

    pub fn constant(c: f64) -> Self {
        Forcing::Steady(SourceTerm::Closed(ClosedForm::constant(c)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Forcing::Steady(src) => Forcing::Steady(src.scaled(s)),
            Forcing::Frames(st) => {
                let mut frames = st.frames().iter().map(|f| SourceTerm::Sampled(f.clone()).scaled(s));
                let first = match frames.next() {
                    Some(SourceTerm::Sampled(f)) => f,
                    _ => unreachable!(),
                };
                let mut out = SpaceTimeField::new(first, st.dt()).expect("valid dt");
                for f in frames {
                    if let SourceTerm::Sampled(f) = f {
                        out.push(f).expect("same dof map");
                    }
                }
                Forcing::Frames(out)
            }
        }
    }

    /// Check that frame-wise data covers a run of `steps` steps.
    pub fn check_steps(&self, steps: usize) -> Result<(), DiscretizationError> {
        match self {
            Forcing::Frames(st) if st.steps() != steps => Err(DiscretizationError::Shape(format!(
                "forcing has {} steps, run has {steps}",
                st.steps()
            ))),
            _ => Ok(()),
        }
    }

    /// Nodal values of `f(·, t_step)` on `dofmap`.
    pub fn nodal_values(&self, step: usize, dofmap: &Arc<DofMap>) -> Result<Vec<f64>, DiscretizationError> {
        match self {
            Forcing::Steady(src) => src.nodal_values(dofmap),
            Forcing::Frames(st) => sample_onto(st.frame(step), dofmap),
        }
    }

    pub fn is_steady(&self) -> bool {
        matches!(self, Forcing::Steady(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Steady(src) => src.is_zero(),
            Forcing::Frames(st) => st.frames().iter().all(|f| f.values().iter().all(|&v| v == 0.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for text in ["zero", "const 1.0", "sin 1 1 1.0", "sin 2 3 -0.5 + const 0.25"] {
            let e: ClosedForm = text.parse().unwrap();
            let again: ClosedForm = e.to_string().parse().unwrap();
            assert_eq!(e, again, "{text}");
        }
        assert_eq!("sin 1 1".parse::<ClosedForm>().unwrap(), ClosedForm::sin_product(1.0, 1, 1));
        assert!("cos 1 1".parse::<ClosedForm>().is_err());
        assert_eq!("const 1e+2".parse::<ClosedForm>().unwrap(), ClosedForm::constant(100.0));
    }

    #[test]
    fn analytic_integral() {
        let e = ClosedForm::sin_product(1.0, 1, 1);
        let expected = 4.0 / (PI * PI);
        assert!((e.integral() - expected).abs() < 1e-15);
        assert!(ClosedForm::sin_product(1.0, 2, 1).integral().abs() < 1e-16);
    }
}
