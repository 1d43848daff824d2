//! Uniform-grid bilinear finite elements on the unit square or the unit cell.

mod assembly;
mod dofmap;
mod field;
pub mod quadrature;

use thiserror::Error;

pub use assembly::{assemble_mass, assemble_stiffness, element_mass, element_stiffness, Assembler};
pub use dofmap::{BoundaryMode, DofMap, NodeDof};
pub use field::{l2_norm_of, Field, SpaceTimeField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("grid needs at least 2 cells per side, got {0}")]
    GridTooSmall(usize),
    #[error("no active element")]
    NoActiveElements,
    #[error("point ({}, {}) outside the grid domain", .0[0], .0[1])]
    OutsideDomain([f64; 2]),
    #[error("non-finite field value")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Uniform grid with `n` cells per side on the unit square, `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

/// An element with its integer position and midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementId {
    pub i: usize,
    pub j: usize,
    pub center: [f64; 2],
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, DiscretizationError> {
        if n < 2 {
            return Err(DiscretizationError::GridTooSmall(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node_coord(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.n as f64;
        [i as f64 / n, j as f64 / n]
    }

    pub fn element_center(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.n as f64;
        [(i as f64 + 0.5) / n, (j as f64 + 0.5) / n]
    }

    pub fn element(&self, i: usize, j: usize) -> ElementId {
        ElementId {
            i,
            j,
            center: self.element_center(i, j),
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = ElementId> + '_ {
        (0..self.n).flat_map(move |j| (0..self.n).map(move |i| self.element(i, j)))
    }
}

/// Element activity from a point indicator sampled at element centers.
pub fn mark_active_cells(grid: Grid, indicator: impl Fn([f64; 2]) -> bool) -> Result<Vec<bool>, DiscretizationError> {
    mark_active_elements(grid, |e| indicator(e.center))
}

pub fn mark_active_elements(grid: Grid, active: impl Fn(ElementId) -> bool) -> Result<Vec<bool>, DiscretizationError> {
    let flags: Vec<bool> = grid.elements().map(active).collect();
    if !flags.iter().any(|&a| a) {
        return Err(DiscretizationError::NoActiveElements);
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::UnitCell;

    #[test]
    fn marking_examples() {
        let g = Grid::new(8).unwrap();
        assert_eq!(mark_active_cells(g, |_| true).unwrap().iter().filter(|&&a| a).count(), 64);

        // oracle: enumerate the 64 centers against the disk directly
        let inside = (0..8)
            .flat_map(|j| (0..8).map(move |i| (i, j)))
            .filter(|&(i, j)| {
                let x = (i as f64 + 0.5) / 8.0 - 0.5;
                let y = (j as f64 + 0.5) / 8.0 - 0.5;
                x * x + y * y <= 0.0625
            })
            .count();
        assert_eq!(inside, 12);
        let cell = UnitCell::disk([0.5, 0.5], 0.25).unwrap();
        let flags = mark_active_cells(g, |y| cell.in_fluid(y)).unwrap();
        assert_eq!(flags.iter().filter(|&&a| !a).count(), 12);

        assert_eq!(mark_active_cells(g, |_| false), Err(DiscretizationError::NoActiveElements));
    }

    #[test]
    fn inactive_fraction_converges_to_hole_area() {
        let cell = UnitCell::disk([0.5, 0.5], 0.25).unwrap();
        let g = Grid::new(512).unwrap();
        let flags = mark_active_cells(g, |y| cell.in_fluid(y)).unwrap();
        let frac = flags.iter().filter(|&&a| !a).count() as f64 / (512.0 * 512.0);
        assert!((frac - std::f64::consts::PI / 16.0).abs() < 1e-3);
    }

    fn square(n: usize) -> Arc<DofMap> {
        Arc::new(DofMap::full(Grid::new(n).unwrap(), BoundaryMode::DirichletSquare))
    }

    #[test]
    fn field_helpers() {
        let d = Arc::new(DofMap::full(Grid::new(6).unwrap(), BoundaryMode::PeriodicCell));
        let m = assemble_mass(&d);
        let c = Field::from_fn(d.clone(), |_| 2.5);
        assert!((c.mean(&m) - 2.5).abs() < 1e-14);
        assert!((c.l2_norm(&m) - 2.5).abs() < 1e-14);
        let z = Field::zeros(d);
        assert_eq!(z.mean(&m), 0.0);
        assert_eq!(z.l2_norm(&m), 0.0);

        let sq = square(8);
        let lin = Field::from_fn(sq.clone(), |x| x[0]);
        assert!((lin.evaluate([0.25, 0.6]).unwrap() - 0.25).abs() < 1e-15);
        assert!(lin.evaluate([1.2, 0.5]).is_err());
        let g = lin.gradient([0.4, 0.4]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-14 && g[1].abs() < 1e-14);
    }

    #[test]
    fn mass_is_positive_definite() {
        use proptest::prelude::*;
        let d = square(5);
        let m = assemble_mass(&d);
        proptest!(|(v in proptest::collection::vec(-1.0f64..1.0, 16))| {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            prop_assert!(l2_norm_of(&v, &m) > 0.0);
        });
    }

    #[test]
    fn space_time_bookkeeping() {
        let d = square(4);
        let mut st = SpaceTimeField::new(Field::zeros(d.clone()), 0.05 / 16.0).unwrap();
        for _ in 0..16 {
            st.push(Field::zeros(d.clone())).unwrap();
        }
        assert!((st.final_time() - 0.05).abs() < 1e-12);
        assert!((st.trapezoid_weights().iter().sum::<f64>() - 0.05).abs() < 1e-15);
        let other = square(5);
        assert!(st.push(Field::zeros(other)).is_err());
    }
}
