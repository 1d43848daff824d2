//! Time-periodic parabolic cell problem on the fluid part of the unit cell
//! and the resulting effective tensor.
//!
//! For each direction `e_j` the corrector solves
//! `∂_s z_j − ∇·(A(y, s)(e_j + ∇z_j)) = 0` in `Y* × (0, 1)`, periodic in `y`
//! and `s`, with zero conormal flux on the hole boundary. Implicit Euler in
//! `s` is iterated over whole periods until the end state reproduces the
//! start state.

use std::sync::Arc;
use std::thread;

use thiserror::Error;

use crate::coefficients::{sym_min_eigenvalue, CoefficientModel, Mat2};
use crate::discretization::{
    l2_norm_of, mark_active_cells, Assembler, BoundaryMode, DiscretizationError, DofMap, Field, Grid,
    SpaceTimeField,
};
use crate::geometry::{wrap_point, wrap_unit, UnitCell};
use crate::linalg::{dot, LinalgError, Method, SolverOptions, SparseMatrix};

/// Step matrices are kept for a whole period only below this many stored
/// nonzeros; beyond it they are reassembled at every step.
pub const MATRIX_CACHE_BUDGET: usize = 8_000_000;

/// Residuals below this level count as being in the geometric regime.
const GEOMETRIC_REGIME: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("invalid cell solve options: {0}")]
    Options(String),
    #[error("period iteration for direction {direction} did not converge in {} periods, residuals {history:?}", history.len())]
    NotConverged { direction: usize, history: Vec<f64> },
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolveOptions {
    /// Grid cells per side of the unit cell.
    pub n: usize,
    /// Implicit Euler steps per period, `ds = 1 / steps_per_period`.
    pub steps_per_period: usize,
    pub tol_period: f64,
    pub max_periods: usize,
    pub linear: SolverOptions,
    /// Solve the two directions on separate threads.
    pub parallel: bool,
    /// Remove the mean after every step.
    pub subtract_mean: bool,
}

impl Default for CellSolveOptions {
    fn default() -> Self {
        Self {
            n: 64,
            steps_per_period: 64,
            tol_period: 1e-9,
            max_periods: 200,
            linear: SolverOptions::with_tol(1e-12),
            parallel: true,
            subtract_mean: true,
        }
    }
}

/// `1/ds` as an integer, or an error if `ds` does not divide the period.
pub fn steps_for_ds(ds: f64) -> Result<usize, CellError> {
    if !(ds > 0.0 && ds <= 1.0) {
        return Err(CellError::Options(format!("ds must lie in (0, 1], got {ds}")));
    }
    let inv = 1.0 / ds;
    let p = inv.round();
    if (inv - p).abs() > 1e-9 * p {
        return Err(CellError::Options(format!("1/ds must be an integer, got 1/ds = {inv}")));
    }
    Ok(p as usize)
}

impl CellSolveOptions {
    pub fn with_ds(mut self, ds: f64) -> Result<Self, CellError> {
        self.steps_per_period = steps_for_ds(ds)?;
        Ok(self)
    }

    pub fn ds(&self) -> f64 {
        1.0 / self.steps_per_period as f64
    }

    fn validate(&self) -> Result<(), CellError> {
        if self.n < 2 {
            return Err(CellError::Options(format!("cell grid needs n >= 2, got {}", self.n)));
        }
        if self.steps_per_period == 0 {
            return Err(CellError::Options("steps_per_period must be positive".into()));
        }
        if !(self.tol_period > 0.0 && self.tol_period.is_finite()) {
            return Err(CellError::Options(format!("tol_period must be positive, got {}", self.tol_period)));
        }
        if self.max_periods == 0 {
            return Err(CellError::Options("max_periods must be positive".into()));
        }
        Ok(())
    }
}

/// Periodic cell dof map with elements deactivated inside the hole.
pub fn cell_dofmap(cell: &UnitCell, n: usize) -> Result<Arc<DofMap>, DiscretizationError> {
    let grid = Grid::new(n)?;
    let active = mark_active_cells(grid, |y| cell.in_fluid(y))?;
    Ok(Arc::new(DofMap::new(grid, BoundaryMode::PeriodicCell, active)?))
}

/// Converged correctors over one period, `P + 1` frames per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSet {
    z: [SpaceTimeField; 2],
    histories: [Vec<f64>; 2],
    mass: Arc<SparseMatrix>,
    porosity_h: f64,
}

impl CorrectorSet {
    /// Corrector `z_j`, `j ∈ {0, 1}`.
    pub fn corrector(&self, j: usize) -> &SpaceTimeField {
        &self.z[j]
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        self.z[0].dofmap()
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn steps_per_period(&self) -> usize {
        self.z[0].steps()
    }

    pub fn ds(&self) -> f64 {
        self.z[0].dt()
    }

    /// Final `‖z_j(1) − z_j(0)‖`, the worse of the two directions.
    pub fn period_residual(&self) -> f64 {
        self.histories.iter().map(|h| *h.last().expect("at least one period")).fold(0.0, f64::max)
    }

    pub fn periods_used(&self) -> usize {
        self.histories.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn residual_history(&self, j: usize) -> &[f64] {
        &self.histories[j]
    }

    /// Discrete measure of `Y*`: active element count times `h²`.
    pub fn porosity_h(&self) -> f64 {
        self.porosity_h
    }

    /// Observed period-to-period contraction of direction `j`.
    pub fn contraction_ratio(&self, j: usize) -> Option<f64> {
        contraction_ratio(&self.histories[j])
    }

    /// Largest `|mean(z_j(·, s_m))|` over all frames and directions.
    pub fn max_frame_mean(&self) -> f64 {
        self.z
            .iter()
            .flat_map(|st| st.frames())
            .map(|f| f.mean(&self.mass).abs())
            .fold(0.0, f64::max)
    }

    fn locate_phase(&self, s: f64) -> (usize, f64) {
        let p = self.steps_per_period();
        let q = wrap_unit(s) * p as f64;
        let m = (q.floor() as usize).min(p - 1);
        (m, q - m as f64)
    }

    /// `z_j(y, s)`: bilinear in `y` (wrapped), linear between frames in `s`.
    pub fn value(&self, j: usize, y: [f64; 2], s: f64) -> f64 {
        let y = wrap_point(y);
        let (m, theta) = self.locate_phase(s);
        let at = |k: usize| self.z[j].frame(k).evaluate(y).expect("wrapped point");
        (1.0 - theta) * at(m) + theta * at(m + 1)
    }

    /// `∇_y z_j(y, s)`, interpolated like [`CorrectorSet::value`].
    pub fn gradient(&self, j: usize, y: [f64; 2], s: f64) -> [f64; 2] {
        let y = wrap_point(y);
        let (m, theta) = self.locate_phase(s);
        let g0 = self.z[j].frame(m).gradient(y).expect("wrapped point");
        let g1 = self.z[j].frame(m + 1).gradient(y).expect("wrapped point");
        [(1.0 - theta) * g0[0] + theta * g1[0], (1.0 - theta) * g0[1] + theta * g1[1]]
    }
}

/// Worst ratio `r_{p+1}/r_p` among periods already below `10⁻²`, falling back
/// to the last ratio.
pub fn contraction_ratio(history: &[f64]) -> Option<f64> {
    let ratios: Vec<(f64, f64)> = history
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| (w[0], w[1] / w[0]))
        .collect();
    let regime = ratios
        .iter()
        .filter(|(r, _)| *r < GEOMETRIC_REGIME)
        .map(|&(_, q)| q)
        .fold(None, |acc: Option<f64>, q| Some(acc.map_or(q, |a| a.max(q))));
    regime.or_else(|| ratios.last().map(|&(_, q)| q))
}

enum StepMatrices {
    Single(SparseMatrix),
    Cached(Vec<SparseMatrix>),
    OnTheFly,
}

/// Everything the march needs at step `m`, shared by both directions.
struct StepOperators<'a> {
    assembler: Assembler,
    model: &'a CoefficientModel,
    mass: Arc<SparseMatrix>,
    mass_rows: Vec<f64>,
    mass_total: f64,
    steps: usize,
    matrices: StepMatrices,
    loads: Vec<[Vec<f64>; 2]>,
    method: Method,
}

impl<'a> StepOperators<'a> {
    fn new(dofmap: Arc<DofMap>, model: &'a CoefficientModel, steps: usize) -> Self {
        let assembler = Assembler::new(dofmap);
        let mass = Arc::new(assembler.mass());
        let mass_rows = mass.matvec(&vec![1.0; mass.nrows()]).expect("square mass");
        let mass_total = mass_rows.iter().sum();
        let ds = 1.0 / steps as f64;
        let mut ops = Self {
            assembler,
            model,
            mass,
            mass_rows,
            mass_total,
            steps,
            matrices: StepMatrices::OnTheFly,
            loads: Vec::new(),
            method: Method::for_symmetry(model.is_symmetric()),
        };
        let phases = if model.is_time_independent() { 1 } else { steps };
        ops.loads = (1..=phases).map(|m| ops.loads_at(m as f64 * ds)).collect();
        ops.matrices = if phases == 1 {
            StepMatrices::Single(ops.assemble(ds))
        } else if phases * ops.mass.nnz() <= MATRIX_CACHE_BUDGET {
            StepMatrices::Cached((1..=phases).map(|m| ops.assemble(m as f64 * ds)).collect())
        } else {
            StepMatrices::OnTheFly
        };
        ops
    }

    fn s(&self, m: usize) -> f64 {
        m as f64 / self.steps as f64
    }

    fn stiffness_at(&self, s: f64) -> SparseMatrix {
        let model = self.model;
        self.assembler.stiffness(|e| model.eval_a(e.center, s))
    }

    fn loads_at(&self, s: f64) -> [Vec<f64>; 2] {
        let model = self.model;
        self.assembler.divergence_loads(|e| model.eval_a(e.center, s))
    }

    /// `M/ds + K(s)`.
    fn assemble(&self, s: f64) -> SparseMatrix {
        let k = self.stiffness_at(s);
        self.mass
            .linear_combination(self.steps as f64, &k, 1.0)
            .expect("mass and stiffness share the assembler pattern")
    }

    fn with_matrix<T>(&self, m: usize, f: impl FnOnce(&SparseMatrix) -> T) -> T {
        match &self.matrices {
            StepMatrices::Single(a) => f(a),
            StepMatrices::Cached(all) => f(&all[m - 1]),
            StepMatrices::OnTheFly => f(&self.assemble(self.s(m))),
        }
    }

    fn load(&self, m: usize, j: usize) -> &[f64] {
        let idx = if self.loads.len() == 1 { 0 } else { m - 1 };
        &self.loads[idx][j]
    }

    fn remove_mean(&self, z: &mut [f64]) {
        let mean = dot(&self.mass_rows, z) / self.mass_total;
        for v in z.iter_mut() {
            *v -= mean;
        }
    }

    fn march(&self, j: usize, opts: &CellSolveOptions) -> Result<(SpaceTimeField, Vec<f64>), CellError> {
        let dofmap = self.assembler.dofmap().clone();
        let neq = dofmap.n_equations();
        let inv_ds = self.steps as f64;
        let mut z = vec![0.0; neq];
        let mut history = Vec::new();
        let mut mz = vec![0.0; neq];
        for _ in 0..opts.max_periods {
            let mut frames = Vec::with_capacity(self.steps + 1);
            frames.push(z.clone());
            for m in 1..=self.steps {
                self.mass.matvec_into(&z, &mut mz)?;
                let f = self.load(m, j);
                let rhs: Vec<f64> = mz.iter().zip(f).map(|(a, b)| inv_ds * a - b).collect();
                let sol = self.with_matrix(m, |a| self.method.solve(a, &rhs, Some(&z), &opts.linear))?;
                z = sol.x;
                if opts.subtract_mean {
                    self.remove_mean(&mut z);
                }
                frames.push(z.clone());
            }
            let diff: Vec<f64> = z.iter().zip(&frames[0]).map(|(a, b)| a - b).collect();
            let r = l2_norm_of(&diff, &self.mass);
            history.push(r);
            if r <= opts.tol_period {
                let mut frames = frames.into_iter().map(|v| Field::new(dofmap.clone(), v));
                let mut st = SpaceTimeField::new(frames.next().expect("initial frame")?, 1.0 / inv_ds)?;
                for f in frames {
                    st.push(f?)?;
                }
                return Ok((st, history));
            }
        }
        Err(CellError::NotConverged {
            direction: j + 1,
            history,
        })
    }
}

/// Solve the time-periodic cell problem for both directions.
pub fn solve_cell_problem(
    cell: &UnitCell,
    model: &CoefficientModel,
    opts: &CellSolveOptions,
) -> Result<CorrectorSet, CellError> {
    opts.validate()?;
    let dofmap = cell_dofmap(cell, opts.n)?;
    let porosity_h = dofmap.active_area();
    let ops = StepOperators::new(dofmap, model, opts.steps_per_period);
    let (r1, r2) = if opts.parallel {
        thread::scope(|scope| {
            let second = scope.spawn(|| ops.march(1, opts));
            let first = ops.march(0, opts);
            (first, second.join().expect("corrector thread panicked"))
        })
    } else {
        (ops.march(0, opts), ops.march(1, opts))
    };
    let (z1, h1) = r1?;
    let (z2, h2) = r2?;
    Ok(CorrectorSet {
        z: [z1, z2],
        histories: [h1, h2],
        mass: ops.mass.clone(),
        porosity_h,
    })
}

/// Homogenized matrix `b` together with the porosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveTensor {
    pub b: Mat2,
    /// `μ(Y*)` from the exact hole area.
    pub mu_star: f64,
    /// Discrete measure of `Y*` on the cell grid.
    pub mu_star_h: f64,
}

impl EffectiveTensor {
    /// User-supplied tensor with a single porosity value.
    pub fn prescribed(b: Mat2, mu: f64) -> Self {
        Self {
            b,
            mu_star: mu,
            mu_star_h: mu,
        }
    }

    /// Smallest eigenvalue of `(b + bᵀ)/2`.
    pub fn min_sym_eigenvalue(&self) -> f64 {
        sym_min_eigenvalue(&self.b)
    }

    pub fn is_coercive(&self) -> bool {
        self.min_sym_eigenvalue() > 0.0
    }
}

fn tensor_from_frames<'f>(
    dofmap: &DofMap,
    model: &CoefficientModel,
    phases: impl Iterator<Item = (f64, [&'f Field; 2])>,
) -> Mat2 {
    let grid = dofmap.grid();
    let h2 = grid.h() * grid.h();
    let mut b = [[0.0; 2]; 2];
    let mut count = 0usize;
    for (s, z) in phases {
        count += 1;
        for e in grid.elements() {
            if !dofmap.is_active(e.i, e.j) {
                continue;
            }
            let a = model.eval_a(e.center, s);
            let g = [z[0].element_gradient(e.i, e.j), z[1].element_gradient(e.i, e.j)];
            for i in 0..2 {
                for j in 0..2 {
                    b[i][j] += h2 * (a[i][j] + a[i][0] * g[j][0] + a[i][1] * g[j][1]);
                }
            }
        }
    }
    let w = 1.0 / count as f64;
    b.map(|row| row.map(|v| v * w))
}

/// `b_ij = ∫₀¹∫_{Y*} A_ij + Σ_k A_ik ∂_k z_j`: element midpoints in `y`,
/// right-endpoint rectangle rule over the stored frames in `s`.
pub fn effective_tensor(correctors: &CorrectorSet, model: &CoefficientModel, cell: &UnitCell) -> EffectiveTensor {
    let p = correctors.steps_per_period();
    let phases = (1..=p).map(|m| {
        (
            m as f64 / p as f64,
            [correctors.corrector(0).frame(m), correctors.corrector(1).frame(m)],
        )
    });
    EffectiveTensor {
        b: tensor_from_frames(correctors.dofmap(), model, phases),
        mu_star: cell.porosity(),
        mu_star_h: correctors.porosity_h(),
    }
}

/// Stationary cell correctors `K(s) z_j = −F_j(s)` with zero mean, for a
/// frozen time `s`.
pub fn solve_stationary_cell(
    cell: &UnitCell,
    model: &CoefficientModel,
    s: f64,
    n: usize,
    linear: &SolverOptions,
) -> Result<[Field; 2], CellError> {
    let dofmap = cell_dofmap(cell, n)?;
    let assembler = Assembler::new(dofmap.clone());
    let a_of = |e: crate::discretization::ElementId| model.eval_a(e.center, s);
    let k = assembler.stiffness(a_of);
    let loads = assembler.divergence_loads(a_of);
    let mass = assembler.mass();
    let method = Method::for_symmetry(model.is_symmetric());
    let solve = |f: &[f64]| -> Result<Field, CellError> {
        let shift = f.iter().sum::<f64>() / f.len() as f64;
        let rhs: Vec<f64> = f.iter().map(|v| shift - v).collect();
        let mut z = Field::new(dofmap.clone(), method.solve(&k, &rhs, None, linear)?.x)?;
        let mean = z.mean(&mass);
        z.values_mut().iter_mut().for_each(|v| *v -= mean);
        Ok(z)
    };
    Ok([solve(&loads[0])?, solve(&loads[1])?])
}

/// Effective tensor of an `s`-independent model from one stationary solve
/// per direction.
pub fn stationary_effective_tensor(
    cell: &UnitCell,
    model: &CoefficientModel,
    n: usize,
    linear: &SolverOptions,
) -> Result<EffectiveTensor, CellError> {
    if !model.is_time_independent() {
        return Err(CellError::Options("stationary tensor needs an s-independent model".into()));
    }
    let z = solve_stationary_cell(cell, model, 0.0, n, linear)?;
    let dofmap = z[0].dofmap().clone();
    let b = tensor_from_frames(&dofmap, model, std::iter::once((0.0, [&z[0], &z[1]])));
    Ok(EffectiveTensor {
        b,
        mu_star: cell.porosity(),
        mu_star_h: dofmap.active_area(),
    })
}
