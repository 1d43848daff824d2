//! Q1 assembly with one-point coefficient sampling.
//!
//! Element integrals of basis-gradient products are exact; the coefficient is
//! frozen at the element midpoint. Inactive elements are skipped, which is the
//! weak form of a homogeneous Neumann condition on hole boundaries.

use std::sync::{Arc, OnceLock};

use super::{DofMap, ElementId, NodeDof};
use crate::coefficients::Mat2;
use crate::linalg::SparseMatrix;

/// `∂_ξ φ_p, ∂_η φ_p` at reference point `(ξ, η)`, local order
/// `(0,0), (1,0), (1,1), (0,1)`.
pub(crate) fn reference_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [eta, xi],
        [-eta, 1.0 - xi],
    ]
}

pub(crate) fn reference_values(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), xi * eta, (1.0 - xi) * eta]
}

struct ReferenceIntegrals {
    /// `grad[a][b][p][q] = ∫ ∂_a φ_p ∂_b φ_q` over the unit square.
    grad: [[[[f64; 4]; 4]; 2]; 2],
    /// `∫ φ_p φ_q`.
    mass: [[f64; 4]; 4],
    /// `∫ ∂_a φ_p`.
    first: [[f64; 4]; 2],
}

fn reference() -> &'static ReferenceIntegrals {
    static REF: OnceLock<ReferenceIntegrals> = OnceLock::new();
    REF.get_or_init(|| {
        // 2-point Gauss is exact for the bilinear products involved
        let g = 0.5 / 3f64.sqrt();
        let pts = [0.5 - g, 0.5 + g];
        let mut out = ReferenceIntegrals {
            grad: [[[[0.0; 4]; 4]; 2]; 2],
            mass: [[0.0; 4]; 4],
            first: [[0.0; 4]; 2],
        };
        for &xi in &pts {
            for &eta in &pts {
                let w = 0.25;
                let dphi = reference_gradients(xi, eta);
                let phi = reference_values(xi, eta);
                for p in 0..4 {
                    for a in 0..2 {
                        out.first[a][p] += w * dphi[p][a];
                    }
                    for q in 0..4 {
                        out.mass[p][q] += w * phi[p] * phi[q];
                        for a in 0..2 {
                            for b in 0..2 {
                                out.grad[a][b][p][q] += w * dphi[p][a] * dphi[q][b];
                            }
                        }
                    }
                }
            }
        }
        out
    })
}

/// Element stiffness `K_e[p][q] = ∫_e A ∇φ_q · ∇φ_p` for constant `A`
/// (independent of the mesh size in two dimensions).
pub fn element_stiffness(a: &Mat2) -> [[f64; 4]; 4] {
    let r = reference();
    let mut k = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            let mut acc = 0.0;
            for (ia, row) in a.iter().enumerate() {
                for (ib, &coef) in row.iter().enumerate() {
                    acc += coef * r.grad[ia][ib][p][q];
                }
            }
            k[p][q] = acc;
        }
    }
    k
}

/// Consistent element mass matrix for side `h`.
pub fn element_mass(h: f64) -> [[f64; 4]; 4] {
    let r = reference();
    let mut m = r.mass;
    m.iter_mut().flatten().for_each(|v| *v *= h * h);
    m
}

const NONE: usize = usize::MAX;

/// Precomputed sparsity pattern and element scatter slots for one dof map.
#[derive(Debug, Clone)]
pub struct Assembler {
    dofmap: Arc<DofMap>,
    pattern: SparseMatrix,
    /// Per element: value positions for the 4×4 local block (`NONE` if either
    /// node carries no equation); `None` for inactive elements.
    slots: Vec<Option<[usize; 16]>>,
}

fn eq(d: NodeDof) -> Option<usize> {
    match d {
        NodeDof::Equation(e) => Some(e),
        _ => None,
    }
}

impl Assembler {
    pub fn new(dofmap: Arc<DofMap>) -> Self {
        let n = dofmap.grid().n();
        let neq = dofmap.n_equations();
        let mut triplets = Vec::with_capacity(16 * dofmap.active_count());
        for j in 0..n {
            for i in 0..n {
                if !dofmap.is_active(i, j) {
                    continue;
                }
                let nodes = dofmap.element_nodes(i, j);
                for &p in &nodes {
                    for &q in &nodes {
                        if let (Some(r), Some(c)) = (eq(p), eq(q)) {
                            triplets.push((r, c, 0.0));
                        }
                    }
                }
            }
        }
        let pattern = SparseMatrix::from_triplets(neq, neq, triplets).expect("valid equation indices");
        let mut slots = vec![None; n * n];
        for j in 0..n {
            for i in 0..n {
                if !dofmap.is_active(i, j) {
                    continue;
                }
                let nodes = dofmap.element_nodes(i, j);
                let mut s = [NONE; 16];
                for (p, &np) in nodes.iter().enumerate() {
                    for (q, &nq) in nodes.iter().enumerate() {
                        if let (Some(r), Some(c)) = (eq(np), eq(nq)) {
                            s[4 * p + q] = pattern.position(r, c).expect("entry in pattern");
                        }
                    }
                }
                slots[i + n * j] = Some(s);
            }
        }
        Self {
            dofmap,
            pattern,
            slots,
        }
    }

    pub fn dofmap(&self) -> &Arc<DofMap> {
        &self.dofmap
    }

    fn scatter(&self, block_of: impl Fn(ElementId) -> [[f64; 4]; 4]) -> SparseMatrix {
        let grid = self.dofmap.grid();
        let n = grid.n();
        let mut out = self.pattern.zeros_like();
        let values = out.values_mut();
        for j in 0..n {
            for i in 0..n {
                let Some(slots) = &self.slots[i + n * j] else { continue };
                let block = block_of(grid.element(i, j));
                for p in 0..4 {
                    for q in 0..4 {
                        let s = slots[4 * p + q];
                        if s != NONE {
                            values[s] += block[p][q];
                        }
                    }
                }
            }
        }
        out
    }

    /// Stiffness matrix with `A` supplied per element.
    pub fn stiffness(&self, a_of: impl Fn(ElementId) -> Mat2) -> SparseMatrix {
        self.scatter(|e| element_stiffness(&a_of(e)))
    }

    pub fn mass(&self) -> SparseMatrix {
        let block = element_mass(self.dofmap.grid().h());
        self.scatter(|_| block)
    }

    /// The two cell-problem loads `F_j[p] = ∫ A e_j · ∇φ_p`, `j = 1, 2`.
    pub fn divergence_loads(&self, a_of: impl Fn(ElementId) -> Mat2) -> [Vec<f64>; 2] {
        let r = reference();
        let grid = self.dofmap.grid();
        let (n, h) = (grid.n(), grid.h());
        let neq = self.dofmap.n_equations();
        let mut loads = [vec![0.0; neq], vec![0.0; neq]];
        for j in 0..n {
            for i in 0..n {
                if !self.dofmap.is_active(i, j) {
                    continue;
                }
                let a = a_of(grid.element(i, j));
                let nodes = self.dofmap.element_nodes(i, j);
                for (p, &np) in nodes.iter().enumerate() {
                    let Some(row) = eq(np) else { continue };
                    for (dir, load) in loads.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for comp in 0..2 {
                            acc += a[comp][dir] * r.first[comp][p];
                        }
                        load[row] += h * acc;
                    }
                }
            }
        }
        loads
    }
}

/// Stiffness with a pointwise coefficient sampled at element centers.
pub fn assemble_stiffness(dofmap: &Arc<DofMap>, a_at: impl Fn([f64; 2]) -> Mat2) -> SparseMatrix {
    Assembler::new(dofmap.clone()).stiffness(|e| a_at(e.center))
}

pub fn assemble_mass(dofmap: &Arc<DofMap>) -> SparseMatrix {
    Assembler::new(dofmap.clone()).mass()
}
