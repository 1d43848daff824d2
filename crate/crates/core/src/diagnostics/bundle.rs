//! Closed-form test factors `v₁(x) c₁(t) v₂(y) c₂(s)` and quadrature over
//! the fluid part of the unit cell.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::discretization::quadrature::{gauss_legendre, SquareRule};
use crate::geometry::{Hole, UnitCell};
use crate::source::{split_terms, ClosedForm};

/// Tolerance on `∫_{Y*} v₂` for a factor to count as mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

fn num(t: &str, ctx: &str) -> Result<f64, String> {
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad number '{t}' in '{ctx}'")),
    }
}

/// Slow temporal factor `c₁` on `(0, T)`, written in `τ = t/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    /// `exp(1 − 1/(1 − (2τ − 1)²))`, compactly supported in `(0, T)`.
    Bump,
    /// `(4τ(1 − τ))^p`.
    Polynomial { power: u32 },
    Constant(f64),
}

impl TimeFactor {
    pub fn eval(&self, t: f64, t_final: f64) -> f64 {
        let tau = t / t_final;
        match *self {
            TimeFactor::Bump => {
                if tau <= 0.0 || tau >= 1.0 {
                    return 0.0;
                }
                let w = 2.0 * tau - 1.0;
                (1.0 - 1.0 / (1.0 - w * w)).exp()
            }
            TimeFactor::Polynomial { power } => (4.0 * tau * (1.0 - tau)).powi(power as i32),
            TimeFactor::Constant(c) => c,
        }
    }

    /// `d c₁ / dt`.
    pub fn derivative(&self, t: f64, t_final: f64) -> f64 {
        let tau = t / t_final;
        match *self {
            TimeFactor::Bump => {
                if tau <= 0.0 || tau >= 1.0 {
                    return 0.0;
                }
                let w = 2.0 * tau - 1.0;
                let g = 1.0 - w * w;
                self.eval(t, t_final) * (-4.0 * w / (g * g)) / t_final
            }
            TimeFactor::Polynomial { power: 0 } => 0.0,
            TimeFactor::Polynomial { power } => {
                let p = power as f64;
                p * (4.0 * tau * (1.0 - tau)).powi(power as i32 - 1) * 4.0 * (1.0 - 2.0 * tau) / t_final
            }
            TimeFactor::Constant(_) => 0.0,
        }
    }
}

impl fmt::Display for TimeFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFactor::Bump => write!(f, "bump"),
            TimeFactor::Polynomial { power } => write!(f, "poly {power}"),
            TimeFactor::Constant(c) => write!(f, "const {c:?}"),
        }
    }
}

impl FromStr for TimeFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tok: Vec<&str> = s.split_whitespace().collect();
        match tok.as_slice() {
            ["bump"] => Ok(TimeFactor::Bump),
            ["poly", p] => p
                .parse()
                .map(|power| TimeFactor::Polynomial { power })
                .map_err(|_| format!("bad power '{p}' in '{s}'")),
            ["const", c] => Ok(TimeFactor::Constant(num(c, s)?)),
            _ => Err(format!("cannot parse time factor '{s}' (bump | poly <p> | const <c>)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn eval(self, arg: f64) -> f64 {
        match self {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        }
    }

    fn derivative(self, arg: f64) -> f64 {
        match self {
            Trig::Cos => -arg.sin(),
            Trig::Sin => arg.cos(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Trig::Cos => "cos",
            Trig::Sin => "sin",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "cos" => Some(Trig::Cos),
            "sin" => Some(Trig::Sin),
            _ => None,
        }
    }
}

/// Fast temporal factor `c₂(s) = c + Σ a·trig(2πks)`, 1-periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFactor {
    pub constant: f64,
    pub modes: Vec<(Trig, u32, f64)>,
}

impl PeriodicFactor {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            modes: Vec::new(),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.constant
            + self
                .modes
                .iter()
                .map(|&(kind, k, a)| a * kind.eval(2.0 * PI * k as f64 * s))
                .sum::<f64>()
    }

    /// `d c₂ / ds`.
    pub fn derivative(&self, s: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(kind, k, a)| {
                let w = 2.0 * PI * k as f64;
                a * w * kind.derivative(w * s)
            })
            .sum()
    }

    /// `∫₀¹ c₂ ds`.
    pub fn mean(&self) -> f64 {
        self.constant + self.modes.iter().filter(|m| m.1 == 0 && m.0 == Trig::Cos).map(|m| m.2).sum::<f64>()
    }
}

impl fmt::Display for PeriodicFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "const {:?}", self.constant)?;
        for (kind, k, a) in &self.modes {
            write!(f, " + {} {k} {a:?}", kind.name())?;
        }
        Ok(())
    }
}

impl FromStr for PeriodicFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = PeriodicFactor::constant(0.0);
        for part in split_terms(s) {
            let tok: Vec<&str> = part.split_whitespace().collect();
            match tok.as_slice() {
                ["const", c] | [c] => out.constant += num(c, s)?,
                [kind, k, a] => {
                    let kind = Trig::parse(kind).ok_or_else(|| format!("unknown mode '{kind}' in '{s}'"))?;
                    let k = k.parse::<u32>().map_err(|_| format!("bad wave number '{k}' in '{s}'"))?;
                    out.modes.push((kind, k, num(a, s)?));
                }
                _ => return Err(format!("cannot parse periodic factor '{s}'")),
            }
        }
        Ok(out)
    }
}

/// Fast spatial factor `v₂(y) = c + Σ a·trig(2π(p y₁ + q y₂)) − shift`,
/// Y-periodic. `shift` is set by [`CellFactor::projected`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellFactor {
    pub constant: f64,
    pub modes: Vec<(Trig, i32, i32, f64)>,
    shift: f64,
}

impl CellFactor {
    pub fn new(constant: f64, modes: Vec<(Trig, i32, i32, f64)>) -> Self {
        Self {
            constant,
            modes,
            shift: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, Vec::new())
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        self.constant - self.shift
            + self
                .modes
                .iter()
                .map(|&(kind, p, q, a)| a * kind.eval(2.0 * PI * (p as f64 * y[0] + q as f64 * y[1])))
                .sum::<f64>()
    }

    /// `∫_{Y*} v₂ dy` under `rule`.
    pub fn fluid_integral(&self, rule: &CellIntegrator) -> f64 {
        rule.integrate(|y| self.eval(y))
    }

    /// The factor minus its `Y*`-mean under `rule`.
    pub fn projected(&self, rule: &CellIntegrator) -> Self {
        let base = Self::new(self.constant, self.modes.clone());
        let shift = base.fluid_integral(rule) / rule.area();
        Self { shift, ..base }
    }

    pub fn is_mean_zero(&self, rule: &CellIntegrator) -> bool {
        self.fluid_integral(rule).abs() <= MEAN_ZERO_TOL
    }
}

impl fmt::Display for CellFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "const {:?}", self.constant)?;
        for (kind, p, q, a) in &self.modes {
            write!(f, " + {} {p} {q} {a:?}", kind.name())?;
        }
        Ok(())
    }
}

impl FromStr for CellFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = CellFactor::constant(0.0);
        for part in split_terms(s) {
            let tok: Vec<&str> = part.split_whitespace().collect();
            match tok.as_slice() {
                ["const", c] | [c] => out.constant += num(c, s)?,
                [kind, p, q, a] => {
                    let kind = Trig::parse(kind).ok_or_else(|| format!("unknown mode '{kind}' in '{s}'"))?;
                    let int = |t: &str| t.parse::<i32>().map_err(|_| format!("bad wave number '{t}' in '{s}'"));
                    out.modes.push((kind, int(p)?, int(q)?, num(a, s)?));
                }
                _ => return Err(format!("cannot parse cell factor '{s}'")),
            }
        }
        Ok(out)
    }
}

/// How integrals over `Y*` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRule {
    /// Gauss points on the active elements of an `n × n` cell grid (hole
    /// pixelated exactly as the solvers see it).
    Pixelated { n: usize },
    /// Fine Gauss rule on `Y` minus a polar Gauss rule on the disk.
    Resolved,
}

/// A quadrature point in the cell, with its element position on
/// pixelated rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint {
    pub y: [f64; 2],
    pub w: f64,
    pub element: Option<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellIntegrator {
    rule: CellRule,
    points: Vec<CellPoint>,
}

/// Gauss points per direction within each element.
pub const ELEMENT_GAUSS: usize = 3;

impl CellIntegrator {
    pub fn new(cell: &UnitCell, rule: CellRule) -> Self {
        let mut points = Vec::new();
        match rule {
            CellRule::Pixelated { n } => {
                let sq = SquareRule::gauss(ELEMENT_GAUSS);
                let h = 1.0 / n as f64;
                for j in 0..n {
                    for i in 0..n {
                        let center = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                        if !cell.in_fluid(center) {
                            continue;
                        }
                        for &(xi, eta, w) in &sq.points {
                            points.push(CellPoint {
                                y: [(i as f64 + xi) * h, (j as f64 + eta) * h],
                                w: w * h * h,
                                element: Some((i, j, xi, eta)),
                            });
                        }
                    }
                }
            }
            CellRule::Resolved => {
                let sq = SquareRule::gauss(6);
                let panels = 16;
                let h = 1.0 / panels as f64;
                for j in 0..panels {
                    for i in 0..panels {
                        for &(xi, eta, w) in &sq.points {
                            points.push(CellPoint {
                                y: [(i as f64 + xi) * h, (j as f64 + eta) * h],
                                w: w * h * h,
                                element: None,
                            });
                        }
                    }
                }
                if let Hole::Disk { center, radius } = cell.hole() {
                    let (rs, rw) = gauss_legendre(24);
                    let angles = 128;
                    for (r, wr) in rs.iter().zip(&rw) {
                        let rho = r * radius;
                        for a in 0..angles {
                            let th = 2.0 * PI * a as f64 / angles as f64;
                            points.push(CellPoint {
                                y: [center[0] + rho * th.cos(), center[1] + rho * th.sin()],
                                w: -wr * radius * rho * 2.0 * PI / angles as f64,
                                element: None,
                            });
                        }
                    }
                }
            }
        }
        Self { rule, points }
    }

    pub fn rule(&self) -> CellRule {
        self.rule
    }

    pub fn points(&self) -> &[CellPoint] {
        &self.points
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().map(|p| p.w * f(p.y)).sum()
    }

    /// Measure of `Y*` under this rule.
    pub fn area(&self) -> f64 {
        self.points.iter().map(|p| p.w).sum()
    }
}

/// The four test factors of a pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct TestBundle {
    pub v1: ClosedForm,
    pub c1: TimeFactor,
    pub v2: CellFactor,
    pub c2: PeriodicFactor,
}

impl TestBundle {
    /// `v₁ = 1` in every fast and temporal factor.
    pub fn unit(v1: ClosedForm) -> Self {
        Self {
            v1,
            c1: TimeFactor::Constant(1.0),
            v2: CellFactor::constant(1.0),
            c2: PeriodicFactor::constant(1.0),
        }
    }

    pub fn with_v2(&self, v2: CellFactor) -> Self {
        Self { v2, ..self.clone() }
    }
}

impl Default for TestBundle {
    /// `sin πx₁ sin πx₂ · bump(t) · (1 + ½cos 2πy₁) · (1 + ½cos 2πs)`.
    fn default() -> Self {
        Self {
            v1: ClosedForm::sin_product(1.0, 1, 1),
            c1: TimeFactor::Bump,
            v2: CellFactor::new(1.0, vec![(Trig::Cos, 1, 0, 0.5)]),
            c2: PeriodicFactor {
                constant: 1.0,
                modes: vec![(Trig::Cos, 1, 0.5)],
            },
        }
    }
}

/// Default mean-zero fast factor for the very weak pairing, before projection.
pub fn default_very_weak_v2() -> CellFactor {
    CellFactor::new(0.0, vec![(Trig::Cos, 1, 0, 1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> UnitCell {
        UnitCell::disk([0.5, 0.5], 0.25).unwrap()
    }

    #[test]
    fn resolved_rule_measures_the_disk() {
        let r = CellIntegrator::new(&disk(), CellRule::Resolved);
        assert!((r.area() - (1.0 - PI / 16.0)).abs() < 1e-13);
        // ∫_{Y*} cos 2πy₁ = −∫_disk cos 2πy₁ = −(cos π)·2πr J₁(2πr)/(2π) with r = 1/4
        let j1 = 0.566_824_088_905_873_9; // J₁(π/2)
        let expected = 0.25 * j1;
        let computed = r.integrate(|y| (2.0 * PI * y[0]).cos());
        assert!((computed - expected).abs() < 1e-12, "{computed} vs {expected}");
    }

    #[test]
    fn pixelated_rule_matches_element_count() {
        let r = CellIntegrator::new(&disk(), CellRule::Pixelated { n: 8 });
        assert!((r.area() - 52.0 / 64.0).abs() < 1e-14, "{}", r.area());
        let solid = CellIntegrator::new(&UnitCell::solid(), CellRule::Pixelated { n: 8 });
        assert!(solid.integrate(|y| (2.0 * PI * y[0]).cos()).abs() < 1e-15);
    }

    #[test]
    fn projection_makes_mean_zero() {
        for rule in [CellRule::Pixelated { n: 8 }, CellRule::Pixelated { n: 64 }, CellRule::Resolved] {
            let q = CellIntegrator::new(&disk(), rule);
            let v = default_very_weak_v2();
            assert!(!v.is_mean_zero(&q));
            let p = v.projected(&q);
            assert!(p.is_mean_zero(&q), "{rule:?}");
            assert_eq!(p.projected(&q).shift(), p.shift());
        }
    }

    #[test]
    fn time_factor_derivatives() {
        let t_final = 0.05;
        for c in [TimeFactor::Bump, TimeFactor::Polynomial { power: 3 }, TimeFactor::Constant(2.0)] {
            for &t in &[0.01, 0.025, 0.04] {
                let h = 1e-6;
                let fd = (c.eval(t + h, t_final) - c.eval(t - h, t_final)) / (2.0 * h);
                assert!((fd - c.derivative(t, t_final)).abs() < 1e-5 * (1.0 + fd.abs()), "{c:?} at {t}");
            }
        }
        assert_eq!(TimeFactor::Bump.eval(0.0, 1.0), 0.0);
        assert_eq!(TimeFactor::Bump.eval(1.0, 1.0), 0.0);
        assert!((TimeFactor::Bump.eval(0.5, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_factor_derivative_and_mean() {
        let c: PeriodicFactor = "1 + cos 1 0.5 + sin 2 0.25".parse().unwrap();
        assert_eq!(c.mean(), 1.0);
        let h = 1e-6;
        let fd = (c.eval(0.3 + h) - c.eval(0.3 - h)) / (2.0 * h);
        assert!((fd - c.derivative(0.3)).abs() < 1e-6);
        assert!((c.eval(1.3) - c.eval(0.3)).abs() < 1e-14);
    }

    #[test]
    fn text_round_trip() {
        let c2: PeriodicFactor = "const 1.0 + cos 1 0.5".parse().unwrap();
        assert_eq!(c2.to_string().parse::<PeriodicFactor>().unwrap(), c2);
        let v2: CellFactor = "const 1.0 + cos 1 0 0.5 + sin -1 2 0.25".parse().unwrap();
        assert_eq!(v2.to_string().parse::<CellFactor>().unwrap(), v2);
        for t in ["bump", "poly 2", "const 1.0"] {
            let c1: TimeFactor = t.parse().unwrap();
            assert_eq!(c1.to_string(), t);
        }
        assert!("tan 1 0.5".parse::<PeriodicFactor>().is_err());
        assert!("wave".parse::<TimeFactor>().is_err());
    }
}
