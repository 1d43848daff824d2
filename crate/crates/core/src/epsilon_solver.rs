//! Direct simulation of `∂_t u_ε − ∇·(A(x/ε, t/ε²)∇u_ε) = f` on the
//! perforated square, zero Dirichlet data on the outer boundary and zero
//! conormal flux on the holes.

use std::sync::Arc;

use thiserror::Error;

use crate::coefficients::CoefficientModel;
use crate::discretization::{
    Assembler, BoundaryMode, DiscretizationError, DofMap, ElementId, Field, Grid, NodeDof, SpaceTimeField,
};
use crate::geometry::{wrap_unit, PerforatedDomain};
use crate::linalg::{LinalgError, Method, SolverOptions, SparseMatrix};
use crate::source::{Forcing, SourceTerm};

pub const MIN_CELL_RESOLUTION: usize = 8;

/// `dt` may not exceed `ε²` divided by this.
pub const TEMPORAL_RESOLUTION: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectError {
    #[error("need at least {MIN_CELL_RESOLUTION} grid cells per ε-cell, got {0}")]
    MeshTooCoarse(usize),
    #[error("dt = {dt:e} does not resolve the temporal period, need dt ≤ ε²/8 = {limit:e}")]
    TimeStep { dt: f64, limit: f64 },
    #[error("invalid time stepping: {0}")]
    Time(String),
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectOptions {
    /// Grid cells per ε-cell side.
    pub m: usize,
    pub t_final: f64,
    pub steps: usize,
    pub linear: SolverOptions,
    /// Reuse step matrices over one temporal period when `dt` tiles it.
    pub cache: bool,
}

impl DirectOptions {
    pub fn new(m: usize, t_final: f64, steps: usize) -> Self {
        Self {
            m,
            t_final,
            steps,
            linear: SolverOptions::default(),
            cache: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }
}

/// Smallest step count with `T/steps ≤ ε²/per_period`.
pub fn steps_per_rule(epsilon: f64, t_final: f64, per_period: usize) -> usize {
    let q = t_final * per_period as f64 / (epsilon * epsilon);
    (q - 1e-9 * q).ceil().max(1.0) as usize
}

/// Steps per temporal period `ε²` if `dt` divides it, else `None`.
pub fn period_tiling(epsilon: f64, dt: f64) -> Option<usize> {
    let q = epsilon * epsilon / dt;
    let p = q.round();
    (p >= 1.0 && (q - p).abs() <= 1e-9 * p).then_some(p as usize)
}

/// Dirichlet dof map on the `m/ε` grid with hole elements deactivated.
pub fn direct_dofmap(domain: &PerforatedDomain, m: usize) -> Result<Arc<DofMap>, DiscretizationError> {
    let k = domain.cells_per_side();
    let grid = Grid::new(m * k)?;
    let active = grid.elements().map(|e| domain.element_in_fluid(m, e.i, e.j)).collect();
    Ok(Arc::new(DofMap::new(grid, BoundaryMode::DirichletSquare, active)?))
}

/// Cell-local midpoint of fine element `(i, j)`, from integer arithmetic.
fn cell_point(m: usize, e: ElementId) -> [f64; 2] {
    [((e.i % m) as f64 + 0.5) / m as f64, ((e.j % m) as f64 + 0.5) / m as f64]
}

struct Stepper<'a> {
    assembler: Assembler,
    model: &'a CoefficientModel,
    mass: SparseMatrix,
    m: usize,
    dt: f64,
    epsilon: f64,
    tiling: Option<usize>,
    cache: Vec<Option<SparseMatrix>>,
}

impl Stepper<'_> {
    fn assemble(&self, s: f64) -> SparseMatrix {
        let (model, m) = (self.model, self.m);
        let k = self.assembler.stiffness(|e| model.eval_a(cell_point(m, e), s));
        self.mass
            .linear_combination(1.0 / self.dt, &k, 1.0)
            .expect("mass and stiffness share the assembler pattern")
    }

    /// Phase of step `n` and its cache slot. When `dt` tiles the period the
    /// phase is the exact fraction `idx/P`, the same `s_m` the cell solver uses.
    fn phase(&self, n: usize) -> (f64, Option<usize>) {
        if self.model.is_time_independent() {
            return (0.0, Some(0));
        }
        match self.tiling {
            Some(p) if !self.cache.is_empty() => {
                let idx = (n - 1) % p + 1;
                (idx as f64 / p as f64, Some(idx - 1))
            }
            _ => (wrap_unit(n as f64 * self.dt / (self.epsilon * self.epsilon)), None),
        }
    }

    fn with_matrix<T>(&mut self, n: usize, f: impl FnOnce(&SparseMatrix) -> T) -> T {
        let (s, slot) = self.phase(n);
        match slot {
            Some(k) if k < self.cache.len() => {
                if self.cache[k].is_none() {
                    self.cache[k] = Some(self.assemble(s));
                }
                f(self.cache[k].as_ref().expect("filled"))
            }
            _ => f(&self.assemble(s)),
        }
    }
}

/// Implicit Euler on the perforated fine grid.
pub fn solve_direct(
    domain: &PerforatedDomain,
    model: &CoefficientModel,
    forcing: &Forcing,
    u0: &SourceTerm,
    opts: &DirectOptions,
) -> Result<SpaceTimeField, DirectError> {
    if opts.m < MIN_CELL_RESOLUTION {
        return Err(DirectError::MeshTooCoarse(opts.m));
    }
    if opts.steps == 0 || !(opts.t_final > 0.0 && opts.t_final.is_finite()) {
        return Err(DirectError::Time(format!(
            "need T > 0 and at least one step, got T = {}, steps = {}",
            opts.t_final, opts.steps
        )));
    }
    let epsilon = domain.epsilon();
    let dt = opts.dt();
    let limit = epsilon * epsilon / TEMPORAL_RESOLUTION;
    if dt > limit * (1.0 + 1e-12) {
        return Err(DirectError::TimeStep { dt, limit });
    }
    forcing.check_steps(opts.steps)?;

    let dofmap = direct_dofmap(domain, opts.m)?;
    let assembler = Assembler::new(dofmap.clone());
    let mass = assembler.mass();
    let tiling = period_tiling(epsilon, dt);
    let slots = if model.is_time_independent() {
        1
    } else if opts.cache {
        tiling.unwrap_or(0)
    } else {
        0
    };
    let mut stepper = Stepper {
        assembler,
        model,
        mass,
        m: opts.m,
        dt,
        epsilon,
        tiling,
        cache: vec![None; slots],
    };
    let method = Method::for_symmetry(model.is_symmetric());

    let mut u = u0.nodal_values(&dofmap)?;
    let mut out = SpaceTimeField::new(Field::new(dofmap.clone(), u.clone())?, dt)?;
    let mut mu = vec![0.0; u.len()];
    let mut steady: Option<Vec<f64>> = None;
    for n in 1..=opts.steps {
        if steady.is_none() || !forcing.is_steady() {
            let f = forcing.nodal_values(n, &dofmap)?;
            steady = Some(stepper.mass.matvec(&f)?);
        }
        let mf = steady.as_ref().expect("set above");
        stepper.mass.matvec_into(&u, &mut mu)?;
        let rhs: Vec<f64> = mu.iter().zip(mf).map(|(a, f)| a / dt + f).collect();
        let linear = opts.linear;
        u = stepper.with_matrix(n, |a| method.solve(a, &rhs, Some(&u), &linear))?.x;
        out.push(Field::new(dofmap.clone(), u.clone())?)?;
    }
    Ok(out)
}

/// Zero extension of a perforated-domain field to the full square grid.
pub fn extend_by_zero(frame: &Field) -> Field {
    let grid = frame.dofmap().grid();
    let full = Arc::new(DofMap::full(grid, frame.dofmap().mode()));
    extend_by_zero_onto(frame, &full)
}

/// Zero extension onto a given full dof map on the same grid.
pub fn extend_by_zero_onto(frame: &Field, full: &Arc<DofMap>) -> Field {
    let values = (0..full.n_equations())
        .map(|e| {
            let (i, j) = full.equation_node(e);
            match frame.dofmap().node(i, j) {
                NodeDof::Equation(k) => frame.values()[k],
                _ => 0.0,
            }
        })
        .collect();
    Field::new(full.clone(), values).expect("finite values")
}
