//! Reference cell with an optional disk hole, and the periodically perforated
//! unit square built from it.
//!
//! The unit square is tiled by `k × k` cells of side `ε = 1/k`. Every cell
//! whose closure touches the outer boundary is kept whole, so perforations
//! never reach the Dirichlet boundary. All interior cells carry the same hole.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

/// Minimum distance between a disk hole and the cell boundary.
pub const HOLE_CLEARANCE: f64 = 0.05;
/// Exclusive upper bound on the disk radius.
pub const MAX_RADIUS: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("hole not compactly contained in the unit cell: {0}")]
    HoleNotContained(String),
    #[error("hole not compactly contained in the unit cell: radius {0} must satisfy 0 <= r < {MAX_RADIUS}")]
    InvalidRadius(f64),
    #[error("epsilon must be 1/k for an integer k >= 2 (ε must align with the unit square), got {0}")]
    MisalignedEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hole {
    None,
    Disk { center: [f64; 2], radius: f64 },
}

/// The reference cell `Y = (0,1)²` together with its hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCell {
    hole: Hole,
}

impl UnitCell {
    pub fn new(hole: Hole) -> Result<Self, GeometryError> {
        if let Hole::Disk { center, radius } = hole {
            if !(0.0..MAX_RADIUS).contains(&radius) {
                return Err(GeometryError::InvalidRadius(radius));
            }
            let clearance = center
                .iter()
                .map(|&c| (c - radius).min(1.0 - c - radius))
                .fold(f64::INFINITY, f64::min);
            if !(clearance >= HOLE_CLEARANCE - 1e-12) {
                return Err(GeometryError::HoleNotContained(format!(
                    "disk at ({}, {}) with radius {} leaves clearance {:.4} < {}",
                    center[0], center[1], radius, clearance, HOLE_CLEARANCE
                )));
            }
        }
        Ok(Self { hole })
    }

    /// Cell without a hole (`Y* = Y`).
    pub fn solid() -> Self {
        Self { hole: Hole::None }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self, GeometryError> {
        Self::new(Hole::Disk { center, radius })
    }

    pub fn hole(&self) -> Hole {
        self.hole
    }

    pub fn has_hole(&self) -> bool {
        !matches!(self.hole, Hole::None)
    }

    /// Whether `y` (wrapped into `[0,1)²`) lies in the fluid part `Y*`.
    pub fn in_fluid(&self, y: [f64; 2]) -> bool {
        match self.hole {
            Hole::None => true,
            Hole::Disk { center, radius } => {
                let w = wrap_point(y);
                let dx = w[0] - center[0];
                let dy = w[1] - center[1];
                dx * dx + dy * dy > radius * radius
            }
        }
    }

    /// The Y-periodic indicator of the fluid part, as 0 or 1.
    pub fn chi_ystar(&self, y: [f64; 2]) -> u8 {
        u8::from(self.in_fluid(y))
    }

    /// Measure of the fluid part, `1 − |Y^H|`.
    pub fn porosity(&self) -> f64 {
        match self.hole {
            Hole::None => 1.0,
            Hole::Disk { radius, .. } => 1.0 - std::f64::consts::PI * radius * radius,
        }
    }
}

/// Wrap a point componentwise into `[0,1)²`.
pub fn wrap_point(y: [f64; 2]) -> [f64; 2] {
    [wrap_unit(y[0]), wrap_unit(y[1])]
}

pub(crate) fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    // v slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    InFluid,
    InHole,
    OutsideOmega,
}

/// The perforated unit square `Ω_ε` with `ε = 1/k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerforatedDomain {
    cells_per_side: usize,
    cell: UnitCell,
    perforated: Vec<bool>,
}

/// Convert `ε` to the integer `k = 1/ε`, rejecting anything not of that form.
pub fn cells_per_side(epsilon: f64) -> Result<usize, GeometryError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(GeometryError::MisalignedEpsilon(epsilon));
    }
    let inv = 1.0 / epsilon;
    let k = inv.round();
    if k < 2.0 || (inv - k).abs() > 1e-9 * k {
        return Err(GeometryError::MisalignedEpsilon(epsilon));
    }
    Ok(k as usize)
}

pub fn build_perforated_domain(
    epsilon: f64,
    cell: UnitCell,
) -> Result<PerforatedDomain, GeometryError> {
    let k = cells_per_side(epsilon)?;
    Ok(PerforatedDomain::with_cells_per_side(k, cell))
}

impl PerforatedDomain {
    /// Build the tiling with `k ≥ 2` cells per side.
    pub fn with_cells_per_side(k: usize, cell: UnitCell) -> Self {
        assert!(k >= 2, "at least two cells per side are required");
        let mut perforated = vec![false; k * k];
        if cell.has_hole() {
            for j in 1..k - 1 {
                for i in 1..k - 1 {
                    perforated[i + k * j] = true;
                }
            }
        }
        Self {
            cells_per_side: k,
            cell,
            perforated,
        }
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn cell(&self) -> &UnitCell {
        &self.cell
    }

    /// Whether ε-cell `(i, j)` carries a hole.
    pub fn is_perforated(&self, i: usize, j: usize) -> bool {
        self.perforated[i + self.cells_per_side * j]
    }

    pub fn perforated_count(&self) -> usize {
        self.perforated.iter().filter(|&&p| p).count()
    }

    /// Exact measure of `Ω_ε`.
    pub fn fluid_area(&self) -> f64 {
        let k = self.cells_per_side as f64;
        let holes = self.perforated_count() as f64;
        1.0 - holes * (1.0 - self.cell.porosity()) / (k * k)
    }

    pub fn point_class(&self, x: [f64; 2]) -> PointClass {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return PointClass::OutsideOmega;
        }
        let k = self.cells_per_side;
        let kf = k as f64;
        let ci = ((x[0] * kf).floor() as usize).min(k - 1);
        let cj = ((x[1] * kf).floor() as usize).min(k - 1);
        if self.is_perforated(ci, cj) {
            let y = [x[0] * kf - ci as f64, x[1] * kf - cj as f64];
            if !self.cell.in_fluid(y) {
                return PointClass::InHole;
            }
        }
        PointClass::InFluid
    }

    /// Element activity on a fine grid with `m` elements per ε-cell side.
    ///
    /// The cell-local coordinate of the element center is formed from integer
    /// indices, so the marking coincides bit for bit with the marking of an
    /// `m × m` periodic cell grid.
    pub fn element_in_fluid(&self, m: usize, i: usize, j: usize) -> bool {
        let (ci, cj) = (i / m, j / m);
        if !self.is_perforated(ci, cj) {
            return true;
        }
        let y = [
            ((i % m) as f64 + 0.5) / m as f64,
            ((j % m) as f64 + 0.5) / m as f64,
        ];
        self.cell.in_fluid(y)
    }

    /// Monte-Carlo estimate of `|Ω_ε|` with its standard error.
    pub fn fluid_fraction_monte_carlo(&self, samples: usize, seed: u64) -> (f64, f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let hits = (0..samples)
            .filter(|_| {
                let x = [rng.gen::<f64>(), rng.gen::<f64>()];
                self.point_class(x) == PointClass::InFluid
            })
            .count();
        let p = hits as f64 / samples as f64;
        (p, (p * (1.0 - p) / samples as f64).sqrt())
    }
}
