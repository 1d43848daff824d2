use std::sync::Arc;

use super::assembly::{reference_gradients, reference_values};
use super::{DiscretizationError, DofMap, NodeDof};
use crate::linalg::{dot, SparseMatrix};

/// Nodal Q1 field: one value per equation of its dof map.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    dofmap: Arc<DofMap>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(dofmap: Arc<DofMap>, values: Vec<f64>) -> Result<Self, DiscretizationError> {
        if values.len() != dofmap.n_equations() {
            return Err(DiscretizationError::Shape(format!(
                "field expects {} values, got {}",
                dofmap.n_equations(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DiscretizationError::NonFinite);
        }
        Ok(Self { dofmap, values })
    }

    pub fn zeros(dofmap: Arc<DofMap>) -> Self {
        let n = dofmap.n_equations();
        Self {
            dofmap,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant of `f` (boundary and inactive nodes stay zero).
    pub fn from_fn(dofmap: Arc<DofMap>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let grid = dofmap.grid();
        let values = (0..dofmap.n_equations())
            .map(|e| {
                let (i, j) = dofmap.equation_node(e);
                f(grid.node_coord(i, j))
            })
            .collect();
        Self { dofmap, values }
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at grid node `(i, j)`; zero on boundary and inactive nodes.
    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        match self.dofmap.node(i, j) {
            NodeDof::Equation(e) => self.values[e],
            _ => 0.0,
        }
    }

    /// Corner values of element `(i, j)` in local order.
    pub fn element_values(&self, i: usize, j: usize) -> [f64; 4] {
        [
            self.node_value(i, j),
            self.node_value(i + 1, j),
            self.node_value(i + 1, j + 1),
            self.node_value(i, j + 1),
        ]
    }

    /// Bilinear value inside element `(i, j)` at reference point `(ξ, η)`.
    pub fn element_value_at(&self, i: usize, j: usize, xi: f64, eta: f64) -> f64 {
        let v = self.element_values(i, j);
        let phi = reference_values(xi, eta);
        (0..4).map(|p| v[p] * phi[p]).sum()
    }

    /// Gradient inside element `(i, j)` at reference point `(ξ, η)`.
    pub fn element_gradient_at(&self, i: usize, j: usize, xi: f64, eta: f64) -> [f64; 2] {
        let v = self.element_values(i, j);
        let dphi = reference_gradients(xi, eta);
        let inv_h = 1.0 / self.dofmap.grid().h();
        let mut g = [0.0; 2];
        for p in 0..4 {
            g[0] += v[p] * dphi[p][0];
            g[1] += v[p] * dphi[p][1];
        }
        [g[0] * inv_h, g[1] * inv_h]
    }

    /// Gradient at the midpoint of element `(i, j)`.
    pub fn element_gradient(&self, i: usize, j: usize) -> [f64; 2] {
        self.element_gradient_at(i, j, 0.5, 0.5)
    }

    fn locate(&self, x: [f64; 2]) -> Result<(usize, usize, f64, f64), DiscretizationError> {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return Err(DiscretizationError::OutsideDomain(x));
        }
        let n = self.dofmap.grid().n();
        let nf = n as f64;
        let i = ((x[0] * nf).floor() as usize).min(n - 1);
        let j = ((x[1] * nf).floor() as usize).min(n - 1);
        Ok((i, j, x[0] * nf - i as f64, x[1] * nf - j as f64))
    }

    /// Bilinear interpolation; zero on inactive elements.
    pub fn evaluate(&self, x: [f64; 2]) -> Result<f64, DiscretizationError> {
        let (i, j, xi, eta) = self.locate(x)?;
        if !self.dofmap.is_active(i, j) {
            return Ok(0.0);
        }
        Ok(self.element_value_at(i, j, xi, eta))
    }

    /// Gradient at `x`; zero on inactive elements.
    pub fn gradient(&self, x: [f64; 2]) -> Result<[f64; 2], DiscretizationError> {
        let (i, j, xi, eta) = self.locate(x)?;
        if !self.dofmap.is_active(i, j) {
            return Ok([0.0; 2]);
        }
        Ok(self.element_gradient_at(i, j, xi, eta))
    }

    /// `(1ᵀ M u) / (1ᵀ M 1)`.
    pub fn mean(&self, mass: &SparseMatrix) -> f64 {
        let ones = vec![1.0; self.values.len()];
        let mu = mass.matvec(&self.values).expect("mass matches field");
        dot(&ones, &mu) / mass.sum()
    }

    /// `√(uᵀ M u)`.
    pub fn l2_norm(&self, mass: &SparseMatrix) -> f64 {
        l2_norm_of(&self.values, mass)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Field) -> Result<Field, DiscretizationError> {
        if self.dofmap != other.dofmap {
            return Err(DiscretizationError::Shape("fields live on different dof maps".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field {
            dofmap: self.dofmap.clone(),
            values,
        })
    }
}

/// `√(uᵀ M u)` for a raw coefficient vector.
pub fn l2_norm_of(values: &[f64], mass: &SparseMatrix) -> f64 {
    let mu = mass.matvec(values).expect("mass matches vector");
    dot(values, &mu).max(0.0).sqrt()
}

/// Frames `t_0 = 0 < t_1 < … < t_M` with uniform step `dt`, sharing one dof map.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    dofmap: Arc<DofMap>,
    dt: f64,
    frames: Vec<Field>,
}

impl SpaceTimeField {
    pub fn new(initial: Field, dt: f64) -> Result<Self, DiscretizationError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DiscretizationError::Shape(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dofmap: initial.dofmap.clone(),
            dt,
            frames: vec![initial],
        })
    }

    pub fn push(&mut self, frame: Field) -> Result<(), DiscretizationError> {
        if !Arc::ptr_eq(&self.dofmap, &frame.dofmap) && *self.dofmap != *frame.dofmap {
            return Err(DiscretizationError::Shape("frame on a different dof map".into()));
        }
        if frame.values.iter().any(|v| !v.is_finite()) {
            return Err(DiscretizationError::NonFinite);
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn frame(&self, m: usize) -> &Field {
        &self.frames[m]
    }

    pub fn last(&self) -> &Field {
        self.frames.last().expect("at least the initial frame")
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps())
    }

    /// Composite trapezoid weights on the frame times.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.steps();
        (0..=m)
            .map(|k| if k == 0 || k == m { 0.5 * self.dt } else { self.dt })
            .collect()
    }
}
