//! Space-time pairings of computed fields against oscillating test factors.
//!
//! Spatial integrals use a 3×3 Gauss rule per active element applied to the
//! bilinear field times the analytic factors; they are collapsed into nodal
//! weight vectors once per pairing. Temporal integrals use the trapezoid
//! rule on the field's own frames.

use crate::cell_solver::CorrectorSet;
use crate::discretization::quadrature::SquareRule;
use crate::discretization::{DofMap, NodeDof, SpaceTimeField};
use crate::geometry::{cells_per_side, wrap_unit};
use crate::linalg::dot;
use crate::source::ClosedForm;

use super::bundle::{CellIntegrator, PeriodicFactor, TestBundle, TimeFactor, ELEMENT_GAUSS};
use super::DiagnosticsError;

/// Cell-local coordinate of a point of fine element `(i, j)` on an `n`-grid
/// with `k` ε-cells per side, from integer arithmetic when the cells align
/// with the grid.
pub(crate) fn fast_point(n: usize, k: usize, i: usize, j: usize, xi: f64, eta: f64) -> [f64; 2] {
    if n.is_multiple_of(k) {
        let m = n / k;
        [((i % m) as f64 + xi) / m as f64, ((j % m) as f64 + eta) / m as f64]
    } else {
        let h = 1.0 / n as f64;
        [wrap_unit((i as f64 + xi) * h * k as f64), wrap_unit((j as f64 + eta) * h * k as f64)]
    }
}

fn reference(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let phi = [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta];
    let dphi = [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ];
    (phi, dphi)
}

/// `W[p] = ∫ g φ_p` over active elements.
pub(crate) fn nodal_weights(dofmap: &DofMap, g: impl Fn(usize, usize, f64, f64) -> f64) -> Vec<f64> {
    let grid = dofmap.grid();
    let (n, h) = (grid.n(), grid.h());
    let rule = SquareRule::gauss(ELEMENT_GAUSS);
    let mut w = vec![0.0; dofmap.n_equations()];
    for j in 0..n {
        for i in 0..n {
            if !dofmap.is_active(i, j) {
                continue;
            }
            let nodes = dofmap.element_nodes(i, j);
            for &(xi, eta, wq) in &rule.points {
                let (phi, _) = reference(xi, eta);
                let val = wq * h * h * g(i, j, xi, eta);
                for (p, nd) in nodes.iter().enumerate() {
                    if let NodeDof::Equation(e) = nd {
                        w[*e] += val * phi[p];
                    }
                }
            }
        }
    }
    w
}

/// `W_d[p] = ∫ g ∂_d φ_p` over active elements.
fn gradient_weights(dofmap: &DofMap, g: impl Fn(usize, usize, f64, f64) -> f64) -> [Vec<f64>; 2] {
    let grid = dofmap.grid();
    let (n, h) = (grid.n(), grid.h());
    let rule = SquareRule::gauss(ELEMENT_GAUSS);
    let mut w = [vec![0.0; dofmap.n_equations()], vec![0.0; dofmap.n_equations()]];
    for j in 0..n {
        for i in 0..n {
            if !dofmap.is_active(i, j) {
                continue;
            }
            let nodes = dofmap.element_nodes(i, j);
            for &(xi, eta, wq) in &rule.points {
                let (_, dphi) = reference(xi, eta);
                let val = wq * h * g(i, j, xi, eta);
                for (p, nd) in nodes.iter().enumerate() {
                    if let NodeDof::Equation(e) = nd {
                        w[0][*e] += val * dphi[p][0];
                        w[1][*e] += val * dphi[p][1];
                    }
                }
            }
        }
    }
    w
}

fn slow_point(dofmap: &DofMap, i: usize, j: usize, xi: f64, eta: f64) -> [f64; 2] {
    let h = dofmap.grid().h();
    [(i as f64 + xi) * h, (j as f64 + eta) * h]
}

fn aligned_cells(eps: f64) -> Result<usize, DiagnosticsError> {
    cells_per_side(eps).map_err(|e| DiagnosticsError::Mismatch(e.to_string()))
}

/// `Σ_n w_n τ(t_n) (W · u_n)`.
fn time_sum(u: &SpaceTimeField, weights: &[f64], tau: impl Fn(usize, f64) -> f64) -> f64 {
    u.trapezoid_weights()
        .iter()
        .enumerate()
        .map(|(n, wt)| {
            let t = u.time(n);
            let c = tau(n, t);
            if c == 0.0 {
                0.0
            } else {
                wt * c * dot(weights, u.frame(n).values())
            }
        })
        .sum()
}

/// `∫₀ᵀ∫ ũ_ε v₁(x) c₁(t) v₂(x/ε) c₂(t/ε²) dx dt`.
pub fn two_scale_pairing(u_eps: &SpaceTimeField, eps: f64, bundle: &TestBundle) -> Result<f64, DiagnosticsError> {
    let k = aligned_cells(eps)?;
    let d = u_eps.dofmap();
    let n = d.grid().n();
    let w = nodal_weights(d, |i, j, xi, eta| {
        bundle.v1.eval(slow_point(d, i, j, xi, eta)) * bundle.v2.eval(fast_point(n, k, i, j, xi, eta))
    });
    let t_final = u_eps.final_time();
    let k2 = (k * k) as f64;
    Ok(time_sum(u_eps, &w, |_, t| {
        bundle.c1.eval(t, t_final) * bundle.c2.eval(wrap_unit(t * k2))
    }))
}

/// `∫∫ u v₁ c₁ dx dt`.
fn slow_pairing(u: &SpaceTimeField, v1: &ClosedForm, c1: &TimeFactor) -> f64 {
    let d = u.dofmap();
    let w = nodal_weights(d, |i, j, xi, eta| v1.eval(slow_point(d, i, j, xi, eta)));
    let t_final = u.final_time();
    time_sum(u, &w, |_, t| c1.eval(t, t_final))
}

/// `(∫∫ u v₁ c₁)·(∫_Y χ_{Y*} v₂)·(∫₀¹ c₂)`.
pub fn limit_pairing(u: &SpaceTimeField, cell_rule: &CellIntegrator, bundle: &TestBundle) -> f64 {
    slow_pairing(u, &bundle.v1, &bundle.c1) * bundle.v2.fluid_integral(cell_rule) * bundle.c2.mean()
}

/// `ε⁻¹ ∫∫ u_ε v₁ v₂(x/ε) c₁ c₂(t/ε²)`; `v₂` must have zero mean over `Y*`.
pub fn very_weak_pairing(
    u_eps: &SpaceTimeField,
    eps: f64,
    bundle: &TestBundle,
    cell_rule: &CellIntegrator,
) -> Result<f64, DiagnosticsError> {
    let mean = bundle.v2.fluid_integral(cell_rule);
    if !bundle.v2.is_mean_zero(cell_rule) {
        return Err(DiagnosticsError::NotMeanZero(mean));
    }
    Ok(two_scale_pairing(u_eps, eps, bundle)? / eps)
}

/// `Σ_j (∫∫ ∂_j u v₁ c₁)(∫₀¹∫_{Y*} z_j v₂ c₂)`.
pub fn corrector_limit_pairing(u: &SpaceTimeField, correctors: &CorrectorSet, bundle: &TestBundle) -> f64 {
    let d = u.dofmap();
    let g = gradient_weights(d, |i, j, xi, eta| bundle.v1.eval(slow_point(d, i, j, xi, eta)));
    let t_final = u.final_time();
    let slow = g.map(|w| time_sum(u, &w, |_, t| bundle.c1.eval(t, t_final)));

    let cd = correctors.dofmap();
    let v = nodal_weights(cd, |i, j, xi, eta| bundle.v2.eval(slow_point(cd, i, j, xi, eta)));
    let p = correctors.steps_per_period();
    let fast = [0, 1].map(|dir| {
        (1..=p)
            .map(|m| bundle.c2.eval(m as f64 / p as f64) * dot(&v, correctors.corrector(dir).frame(m).values()))
            .sum::<f64>()
            / p as f64
    });
    slow[0] * fast[0] + slow[1] * fast[1]
}

/// `ε^r ∫∫ u_ε v₁ ∂_t(c₁(t) c₂(t/ε^r))`.
pub fn name3_residual(
    u_eps: &SpaceTimeField,
    eps: f64,
    r: f64,
    v1: &ClosedForm,
    c1: &TimeFactor,
    c2: &PeriodicFactor,
) -> f64 {
    let d = u_eps.dofmap();
    let w = nodal_weights(d, |i, j, xi, eta| v1.eval(slow_point(d, i, j, xi, eta)));
    let t_final = u_eps.final_time();
    let scale = eps.powf(r);
    let sum = time_sum(u_eps, &w, |_, t| {
        let s = wrap_unit(t / scale);
        c1.derivative(t, t_final) * c2.eval(s) + c1.eval(t, t_final) * c2.derivative(s) / scale
    });
    scale * sum
}

fn check_frames(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<(), DiagnosticsError> {
    if a.steps() != b.steps() || (a.dt() - b.dt()).abs() > 1e-12 * a.dt() {
        return Err(DiagnosticsError::Mismatch(format!(
            "time grids differ: {} steps of {:e} vs {} steps of {:e}",
            a.steps(),
            a.dt(),
            b.steps(),
            b.dt()
        )));
    }
    if a.dofmap().grid() != b.dofmap().grid() {
        return Err(DiagnosticsError::Mismatch(format!(
            "spatial grids differ: n = {} vs n = {}",
            a.dofmap().grid().n(),
            b.dofmap().grid().n()
        )));
    }
    Ok(())
}

/// `‖u_ε − u‖` in `L²(Ω_ε × (0, T))`, both on the same grid and time levels.
pub fn l2_error(u_eps: &SpaceTimeField, u: &SpaceTimeField) -> Result<f64, DiagnosticsError> {
    check_frames(u_eps, u)?;
    let d = u_eps.dofmap();
    let mass = crate::discretization::assemble_mass(d);
    let nodes: Vec<(usize, usize)> = (0..d.n_equations()).map(|e| d.equation_node(e)).collect();
    let mut total = 0.0;
    for (n, wt) in u_eps.trapezoid_weights().iter().enumerate() {
        let (fe, f) = (u_eps.frame(n), u.frame(n));
        let diff: Vec<f64> = nodes
            .iter()
            .zip(fe.values())
            .map(|(&(i, j), v)| v - f.node_value(i, j))
            .collect();
        let md = mass.matvec(&diff).expect("mass matches field");
        total += wt * dot(&diff, &md);
    }
    Ok(total.max(0.0).sqrt())
}

/// `‖∇u_ε − ∇u − (∇_y z)(x/ε, t/ε²)·∇u‖` in `L²(Ω_ε × (0, T))`, with
/// element-midpoint gradients.
pub fn corrector_error(
    u_eps: &SpaceTimeField,
    u: &SpaceTimeField,
    correctors: &CorrectorSet,
    eps: f64,
) -> Result<f64, DiagnosticsError> {
    check_frames(u_eps, u)?;
    let k = aligned_cells(eps)?;
    let d = u_eps.dofmap();
    let grid = d.grid();
    let (n, h) = (grid.n(), grid.h());
    let k2 = (k * k) as f64;
    let active: Vec<(usize, usize, [f64; 2])> = grid
        .elements()
        .filter(|e| d.is_active(e.i, e.j))
        .map(|e| (e.i, e.j, fast_point(n, k, e.i, e.j, 0.5, 0.5)))
        .collect();
    let mut total = 0.0;
    for (step, wt) in u_eps.trapezoid_weights().iter().enumerate() {
        let s = wrap_unit(u_eps.time(step) * k2);
        let (fe, f) = (u_eps.frame(step), u.frame(step));
        let mut acc = 0.0;
        for &(i, j, y) in &active {
            let ge = fe.element_gradient(i, j);
            let g = f.element_gradient(i, j);
            let z1 = correctors.gradient(0, y, s);
            let z2 = correctors.gradient(1, y, s);
            let d0 = ge[0] - g[0] - z1[0] * g[0] - z2[0] * g[1];
            let d1 = ge[1] - g[1] - z1[1] * g[0] - z2[1] * g[1];
            acc += d0 * d0 + d1 * d1;
        }
        total += wt * h * h * acc;
    }
    Ok(total.max(0.0).sqrt())
}
