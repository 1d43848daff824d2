//! Homogenized problem `μ ∂_t u − ∇·(b∇u) = f` on the unit square with zero
//! Dirichlet data and initial value `u⁰/μ`.

use std::sync::Arc;

use thiserror::Error;

use crate::cell_solver::EffectiveTensor;
use crate::discretization::{
    Assembler, BoundaryMode, DiscretizationError, DofMap, Field, Grid, SpaceTimeField,
};
use crate::linalg::{LinalgError, Method, SolverOptions};
use crate::source::{Forcing, SourceTerm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacroError {
    #[error("effective tensor not coercive: smallest symmetric eigenvalue {0:e}")]
    NotCoercive(f64),
    #[error("porosity must lie in (0, 1], got {0}")]
    Porosity(f64),
    #[error("invalid time stepping: {0}")]
    Time(String),
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

/// Number of steps `T/dt`, required to be an integer.
pub fn steps_for(t_final: f64, dt: f64) -> Result<usize, String> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(format!("final time must be positive, got {t_final}"));
    }
    if !(dt > 0.0 && dt <= t_final) {
        return Err(format!("dt must lie in (0, T], got {dt}"));
    }
    let q = t_final / dt;
    let k = q.round();
    if (q - k).abs() > 1e-9 * k {
        return Err(format!("T/dt must be an integer, got {q}"));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroOptions {
    /// Grid cells per side.
    pub n: usize,
    pub t_final: f64,
    pub steps: usize,
    pub linear: SolverOptions,
}

impl MacroOptions {
    pub fn new(n: usize, t_final: f64, steps: usize) -> Self {
        Self {
            n,
            t_final,
            steps,
            linear: SolverOptions::default(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }
}

/// Full Dirichlet dof map on an `n × n` grid.
pub fn square_dofmap(n: usize) -> Result<Arc<DofMap>, DiscretizationError> {
    Ok(Arc::new(DofMap::full(Grid::new(n)?, BoundaryMode::DirichletSquare)))
}

/// Implicit Euler for the homogenized system, using the discrete porosity
/// `mu_star_h` of the tensor.
pub fn solve_homogenized(
    tensor: &EffectiveTensor,
    forcing: &Forcing,
    u0: &SourceTerm,
    opts: &MacroOptions,
) -> Result<SpaceTimeField, MacroError> {
    let lam = tensor.min_sym_eigenvalue();
    if !(lam > 0.0) {
        return Err(MacroError::NotCoercive(lam));
    }
    let mu = tensor.mu_star_h;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(MacroError::Porosity(mu));
    }
    if opts.steps == 0 || !(opts.t_final > 0.0 && opts.t_final.is_finite()) {
        return Err(MacroError::Time(format!(
            "need T > 0 and at least one step, got T = {}, steps = {}",
            opts.t_final, opts.steps
        )));
    }
    forcing.check_steps(opts.steps)?;
    let dofmap = square_dofmap(opts.n)?;
    let assembler = Assembler::new(dofmap.clone());
    let mass = assembler.mass();
    let b = tensor.b;
    let k = assembler.stiffness(|_| b);
    let dt = opts.dt();
    let system = mass.linear_combination(mu / dt, &k, 1.0)?;
    let method = Method::for_symmetry(b[0][1] == b[1][0]);

    let initial: Vec<f64> = u0.nodal_values(&dofmap)?.iter().map(|v| v / mu).collect();
    let mut u = initial.clone();
    let mut out = SpaceTimeField::new(Field::new(dofmap.clone(), initial)?, dt)?;
    let mut mu_m = vec![0.0; u.len()];
    let mut steady = None;
    for step in 1..=opts.steps {
        let mf = match (forcing.is_steady(), &steady) {
            (true, Some(v)) => v,
            _ => {
                let f = forcing.nodal_values(step, &dofmap)?;
                steady = Some(mass.matvec(&f)?);
                steady.as_ref().expect("just set")
            }
        };
        mass.matvec_into(&u, &mut mu_m)?;
        let rhs: Vec<f64> = mu_m.iter().zip(mf).map(|(a, f)| mu / dt * a + f).collect();
        u = method.solve(&system, &rhs, Some(&u), &opts.linear)?.x;
        out.push(Field::new(dofmap.clone(), u.clone())?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::coefficients::IDENTITY;
    use crate::discretization::assemble_mass;
    use crate::source::ClosedForm;

    fn sinsin() -> SourceTerm {
        SourceTerm::Closed(ClosedForm::sin_product(1.0, 1, 1))
    }

    fn heat_error(b: [[f64; 2]; 2], rate: f64, steps: usize) -> f64 {
        let t = 0.05;
        let mut o = MacroOptions::new(64, t, steps);
        o.linear = SolverOptions::with_tol(1e-12);
        let u = solve_homogenized(&EffectiveTensor::prescribed(b, 1.0), &Forcing::zero(), &sinsin(), &o).unwrap();
        let last = u.last();
        let d = last.dofmap().clone();
        let decay = (-rate * t).exp();
        (0..d.n_equations())
            .map(|e| {
                let (i, j) = d.equation_node(e);
                let x = d.grid().node_coord(i, j);
                (last.values()[e] - decay * (PI * x[0]).sin() * (PI * x[1]).sin()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn heat_kernel_decay() {
        assert!(heat_error(IDENTITY, 2.0 * PI * PI, 256) <= 2e-3);
    }

    #[test]
    fn anisotropic_decay() {
        assert!(heat_error([[4.0, 0.0], [0.0, 1.0]], 5.0 * PI * PI, 256) <= 2e-3);
    }

    #[test]
    fn first_order_in_time() {
        let e1 = heat_error(IDENTITY, 2.0 * PI * PI, 128);
        let e2 = heat_error(IDENTITY, 2.0 * PI * PI, 256);
        let ratio = e1 / e2;
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let o = MacroOptions::new(8, 0.1, 4);
        let u = solve_homogenized(
            &EffectiveTensor::prescribed(IDENTITY, 0.8),
            &Forcing::zero(),
            &SourceTerm::zero(),
            &o,
        )
        .unwrap();
        assert!(u.frames().iter().all(|f| f.max_abs() == 0.0));
        assert_eq!(u.steps(), 4);
    }

    #[test]
    fn energy_decays_without_forcing() {
        let o = MacroOptions::new(16, 0.2, 40);
        let b = [[2.0, 0.5], [0.3, 1.0]];
        let u0 = SourceTerm::Closed("sin 1 2 1.0 + sin 3 1 0.5".parse().unwrap());
        let u = solve_homogenized(&EffectiveTensor::prescribed(b, 0.7), &Forcing::zero(), &u0, &o).unwrap();
        let m = assemble_mass(u.dofmap());
        let norms: Vec<f64> = u.frames().iter().map(|f| f.l2_norm(&m)).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
    }

    #[test]
    fn porosity_rescales_time() {
        let mu = 0.7;
        let u0 = sinsin();
        let mut a = MacroOptions::new(16, 0.1, 20);
        a.linear = SolverOptions::with_tol(1e-14);
        let ua = solve_homogenized(&EffectiveTensor::prescribed(IDENTITY, mu), &Forcing::zero(), &u0, &a).unwrap();
        let mut b = a.clone();
        b.t_final = a.t_final / mu;
        let scaled = SourceTerm::Closed(ClosedForm::sin_product(1.0 / mu, 1, 1));
        let ub = solve_homogenized(&EffectiveTensor::prescribed(IDENTITY, 1.0), &Forcing::zero(), &scaled, &b).unwrap();
        for (fa, fb) in ua.frames().iter().zip(ub.frames()) {
            let d = fa.values().iter().zip(fb.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d <= 1e-12, "{d:e}");
        }
    }

    #[test]
    fn rejects_non_coercive_tensor() {
        let o = MacroOptions::new(8, 0.1, 4);
        let t = EffectiveTensor::prescribed([[1.0, 0.0], [0.0, -0.1]], 1.0);
        assert!(matches!(
            solve_homogenized(&t, &Forcing::zero(), &sinsin(), &o),
            Err(MacroError::NotCoercive(_))
        ));
    }

    #[test]
    fn steps_must_divide_final_time() {
        assert_eq!(steps_for(0.05, 0.05 / 256.0).unwrap(), 256);
        assert!(steps_for(0.05, 0.003).is_err());
        assert!(steps_for(-1.0, 0.1).is_err());
    }
}
