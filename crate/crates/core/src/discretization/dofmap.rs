use super::{DiscretizationError, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// Opposite faces of the cell identified (`H¹_♯`).
    PeriodicCell,
    /// Unit square with homogeneous Dirichlet data on its boundary.
    DirichletSquare,
    /// Unit square with every node free, for data fields.
    FreeSquare,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::PeriodicCell => "periodic",
            BoundaryMode::DirichletSquare => "dirichlet",
            BoundaryMode::FreeSquare => "free",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "periodic" => Some(BoundaryMode::PeriodicCell),
            "dirichlet" => Some(BoundaryMode::DirichletSquare),
            "free" => Some(BoundaryMode::FreeSquare),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDof {
    Equation(usize),
    Boundary,
    Inactive,
}

/// Node-to-equation map for Q1 elements on a uniform grid, honoring
/// periodic identification, Dirichlet nodes, and deactivated (hole) elements.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    grid: Grid,
    mode: BoundaryMode,
    active: Vec<bool>,
    /// Indexed by node `i + (n+1)·j`, `i, j = 0..=n`.
    node_dof: Vec<NodeDof>,
    /// Canonical node for each equation.
    eq_nodes: Vec<(usize, usize)>,
}

impl DofMap {
    /// `active` holds one flag per element, `i + n·j`.
    pub fn new(grid: Grid, mode: BoundaryMode, active: Vec<bool>) -> Result<Self, DiscretizationError> {
        let n = grid.n();
        if active.len() != n * n {
            return Err(DiscretizationError::Shape(format!(
                "expected {} element flags, got {}",
                n * n,
                active.len()
            )));
        }
        if !active.iter().any(|&a| a) {
            return Err(DiscretizationError::NoActiveElements);
        }
        let elem = |i: usize, j: usize| active[i + n * j];
        let side = n + 1;
        let mut node_dof = vec![NodeDof::Inactive; side * side];
        let mut eq_nodes = Vec::new();
        match mode {
            BoundaryMode::PeriodicCell => {
                let mut canonical = vec![NodeDof::Inactive; n * n];
                for j in 0..n {
                    for i in 0..n {
                        let (im, jm) = ((i + n - 1) % n, (j + n - 1) % n);
                        if elem(i, j) || elem(im, j) || elem(i, jm) || elem(im, jm) {
                            canonical[i + n * j] = NodeDof::Equation(eq_nodes.len());
                            eq_nodes.push((i, j));
                        }
                    }
                }
                for j in 0..side {
                    for i in 0..side {
                        node_dof[i + side * j] = canonical[(i % n) + n * (j % n)];
                    }
                }
            }
            BoundaryMode::DirichletSquare => {
                for j in 0..side {
                    for i in 0..side {
                        let idx = i + side * j;
                        if i == 0 || j == 0 || i == n || j == n {
                            node_dof[idx] = NodeDof::Boundary;
                        } else if elem(i, j) || elem(i - 1, j) || elem(i, j - 1) || elem(i - 1, j - 1) {
                            node_dof[idx] = NodeDof::Equation(eq_nodes.len());
                            eq_nodes.push((i, j));
                        }
                    }
                }
            }
            BoundaryMode::FreeSquare => {
                for j in 0..side {
                    for i in 0..side {
                        let touches = |di: usize, dj: usize| {
                            i >= di && j >= dj && i - di < n && j - dj < n && elem(i - di, j - dj)
                        };
                        if touches(0, 0) || touches(1, 0) || touches(0, 1) || touches(1, 1) {
                            node_dof[i + side * j] = NodeDof::Equation(eq_nodes.len());
                            eq_nodes.push((i, j));
                        }
                    }
                }
            }
        }
        Ok(Self {
            grid,
            mode,
            active,
            node_dof,
            eq_nodes,
        })
    }

    /// Every element active.
    pub fn full(grid: Grid, mode: BoundaryMode) -> Self {
        let n = grid.n();
        Self::new(grid, mode, vec![true; n * n]).expect("non-empty grid")
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn n_equations(&self) -> usize {
        self.eq_nodes.len()
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[i + self.grid.n() * j]
    }

    pub fn active_flags(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Total area of active elements.
    pub fn active_area(&self) -> f64 {
        let h = self.grid.h();
        self.active_count() as f64 * h * h
    }

    pub fn node(&self, i: usize, j: usize) -> NodeDof {
        self.node_dof[i + (self.grid.n() + 1) * j]
    }

    /// Grid node `(i, j)` carrying equation `eq` (the canonical periodic image).
    pub fn equation_node(&self, eq: usize) -> (usize, usize) {
        self.eq_nodes[eq]
    }

    /// Node dofs of element `(i, j)` in local order
    /// `(i,j), (i+1,j), (i+1,j+1), (i,j+1)`.
    pub fn element_nodes(&self, i: usize, j: usize) -> [NodeDof; 4] {
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }

    /// Number of inactive nodes (for diagnostics).
    pub fn inactive_node_count(&self) -> usize {
        let n = self.grid.n();
        match self.mode {
            BoundaryMode::PeriodicCell => n * n - self.n_equations(),
            BoundaryMode::DirichletSquare => (n - 1) * (n - 1) - self.n_equations(),
            BoundaryMode::FreeSquare => (n + 1) * (n + 1) - self.n_equations(),
        }
    }
}
