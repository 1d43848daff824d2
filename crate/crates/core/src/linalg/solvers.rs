//! Jacobi-preconditioned Krylov solvers.
//!
//! Both solvers confirm convergence against the residual recomputed from
//! scratch, so the reported residual is always `‖rhs − M x‖`.

use super::sparse::{dot, norm2, SparseMatrix};
use super::LinalgError;

pub const DEFAULT_TOL: f64 = 1e-10;
const BREAKDOWN: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `‖M x − rhs‖ ≤ tol·‖rhs‖`.
    pub tol: f64,
    /// Iteration cap; `None` means `20 × unknowns`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(20 * n.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖rhs − M x‖`, recomputed from scratch.
    pub residual: f64,
    pub rhs_norm: f64,
}

fn check_square(m: &SparseMatrix, rhs: &[f64]) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if rhs.len() != m.nrows() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.nrows(),
            found: rhs.len(),
        });
    }
    Ok(())
}

fn inverse_diagonal(m: &SparseMatrix) -> Vec<f64> {
    m.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn true_residual(m: &SparseMatrix, x: &[f64], rhs: &[f64], r: &mut [f64]) -> f64 {
    m.matvec_into(x, r).expect("dimensions checked");
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    norm2(r)
}

pub fn solve_cg(m: &SparseMatrix, rhs: &[f64], opts: &SolverOptions) -> Result<Solution, LinalgError> {
    solve_cg_from(m, rhs, None, opts)
}

/// Conjugate gradients for symmetric positive (semi)definite `m`, optionally
/// warm-started from `guess`.
pub fn solve_cg_from(
    m: &SparseMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Solution, LinalgError> {
    check_square(m, rhs)?;
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            rhs_norm,
        });
    }
    let target = opts.tol * rhs_norm;
    let cap = opts.cap(n);
    let dinv = inverse_diagonal(m);

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut res = true_residual(m, &x, rhs, &mut r);
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;

    while res > target {
        // (re)start from the current true residual
        for i in 0..n {
            z[i] = dinv[i] * r[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut recursive = res;
        while recursive > target {
            if iterations >= cap {
                return Err(LinalgError::NotConverged {
                    iterations,
                    residual: true_residual(m, &x, rhs, &mut q),
                });
            }
            iterations += 1;
            m.matvec_into(&p, &mut q)?;
            let curvature = dot(&p, &q);
            if !(curvature > 0.0) {
                return Err(LinalgError::NotSpd { curvature });
            }
            let alpha = rz / curvature;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            recursive = norm2(&r);
            for i in 0..n {
                z[i] = dinv[i] * r[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        res = true_residual(m, &x, rhs, &mut r);
        if iterations >= cap && res > target {
            return Err(LinalgError::NotConverged {
                iterations,
                residual: res,
            });
        }
    }
    Ok(Solution {
        x,
        iterations,
        residual: res,
        rhs_norm,
    })
}

pub fn solve_bicgstab(
    m: &SparseMatrix,
    rhs: &[f64],
    opts: &SolverOptions,
) -> Result<Solution, LinalgError> {
    solve_bicgstab_from(m, rhs, None, opts)
}

/// Right-preconditioned BiCGStab for general nonsingular `m`.
///
/// Breakdown is declared when `|ρ| < 1e-30·‖rhs‖²`.
pub fn solve_bicgstab_from(
    m: &SparseMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Solution, LinalgError> {
    check_square(m, rhs)?;
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            rhs_norm,
        });
    }
    let target = opts.tol * rhs_norm;
    let cap = opts.cap(n);
    let dinv = inverse_diagonal(m);
    let breakdown = BREAKDOWN * rhs_norm * rhs_norm;

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut res = true_residual(m, &x, rhs, &mut r);
    let mut iterations = 0;
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zs = vec![0.0; n];
    let mut t = vec![0.0; n];

    while res > target {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        let mut recursive = res;
        while recursive > target {
            if iterations >= cap {
                return Err(LinalgError::NotConverged {
                    iterations,
                    residual: true_residual(m, &x, rhs, &mut t),
                });
            }
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < breakdown {
                return Err(LinalgError::Breakdown { rho: rho_new });
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                y[i] = dinv[i] * p[i];
            }
            m.matvec_into(&y, &mut v)?;
            let rv = dot(&r_hat, &v);
            if rv.abs() < breakdown {
                return Err(LinalgError::Breakdown { rho: rv });
            }
            alpha = rho / rv;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm2(&s) <= target {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                break;
            }
            for i in 0..n {
                zs[i] = dinv[i] * s[i];
            }
            m.matvec_into(&zs, &mut t)?;
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * y[i] + omega * zs[i];
                r[i] = s[i] - omega * t[i];
            }
            recursive = norm2(&r);
            if omega == 0.0 && recursive > target {
                return Err(LinalgError::Breakdown { rho: omega });
            }
        }
        res = true_residual(m, &x, rhs, &mut r);
        if iterations >= cap && res > target {
            return Err(LinalgError::NotConverged {
                iterations,
                residual: res,
            });
        }
    }
    Ok(Solution {
        x,
        iterations,
        residual: res,
        rhs_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    fn shifted_identity(n: usize) -> SparseMatrix {
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        t.extend((0..n - 1).map(|i| (i, i + 1, 0.7)));
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    fn recomputed(m: &SparseMatrix, sol: &Solution, rhs: &[f64]) -> f64 {
        let ax = m.matvec(&sol.x).unwrap();
        norm2(&ax.iter().zip(rhs).map(|(a, b)| b - a).collect::<Vec<_>>())
    }

    #[test]
    fn matvec_examples() {
        let x = [1.5, -2.0, 3.25];
        assert_eq!(SparseMatrix::identity(3).matvec(&x).unwrap(), x.to_vec());
        let l = laplacian_1d(4);
        assert_eq!(l.matvec(&[0.0, 1.0, 0.0, 0.0]).unwrap(), vec![-1.0, 2.0, -1.0, 0.0]);
        let z = l.zeros_like();
        assert_eq!(z.matvec(&[1.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(matches!(
            l.matvec(&[1.0; 3]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(1, 1, 1.0), (0, 1, 2.0), (1, 1, 3.0), (0, 0, 1.0)])
            .unwrap();
        assert_eq!(m.col_idx(), &[0, 1, 1]);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn cg_identity_one_iteration() {
        let rhs = vec![1.0, -4.0, 2.5, 0.3];
        let sol = solve_cg(&SparseMatrix::identity(4), &rhs, &SolverOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x, rhs);
    }

    #[test]
    fn cg_recovers_known_solution() {
        let m = laplacian_1d(8);
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let rhs = m.matvec(&x).unwrap();
        let opts = SolverOptions::default();
        let sol = solve_cg(&m, &rhs, &opts).unwrap();
        assert!(sol.residual <= opts.tol * norm2(&rhs));
        for (a, b) in sol.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((recomputed(&m, &sol, &rhs) - sol.residual).abs() <= 1e-13);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = laplacian_1d(5);
        let opts = SolverOptions::default();
        assert_eq!(solve_cg(&m, &[0.0; 5], &opts).unwrap().x, vec![0.0; 5]);
        assert_eq!(solve_bicgstab(&m, &[0.0; 5], &opts).unwrap().x, vec![0.0; 5]);
    }

    #[test]
    fn cg_rejects_indefinite() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(
            solve_cg(&m, &[1.0, 1.0], &SolverOptions::default()),
            Err(LinalgError::NotSpd { .. })
        ));
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = laplacian_1d(50);
        let opts = SolverOptions {
            tol: 1e-12,
            max_iter: Some(3),
        };
        match solve_cg(&m, &vec![1.0; 50], &opts) {
            Err(LinalgError::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn bicgstab_agrees_with_cg_on_symmetric() {
        let m = laplacian_1d(30);
        let rhs: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
        let opts = SolverOptions::default();
        let a = solve_cg(&m, &rhs, &opts).unwrap();
        let b = solve_bicgstab(&m, &rhs, &opts).unwrap();
        let diff = norm2(&a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect::<Vec<_>>());
        // ‖Δx‖ ≤ ‖M⁻¹‖·(r_a + r_b); ‖M⁻¹‖ ≈ 100 for the 30-point Laplacian
        assert!(diff / norm2(&a.x) <= 10.0 * opts.tol * 100.0, "{diff}");
        assert!((recomputed(&m, &b, &rhs) - b.residual).abs() <= 1e-13);
    }

    #[test]
    fn bicgstab_nonsymmetric_known_solution() {
        let m = shifted_identity(6);
        let x: Vec<f64> = (0..6).map(|i| 1.0 - 0.3 * i as f64).collect();
        let rhs = m.matvec(&x).unwrap();
        let sol = solve_bicgstab(&m, &rhs, &SolverOptions::default()).unwrap();
        for (a, b) in sol.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn warm_start_at_solution_takes_no_iterations() {
        let m = laplacian_1d(10);
        let x = vec![1.0; 10];
        let rhs = m.matvec(&x).unwrap();
        let sol = solve_cg_from(&m, &rhs, Some(&x), &SolverOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            xs in proptest::collection::vec(-10.0f64..10.0, 12),
            ys in proptest::collection::vec(-10.0f64..10.0, 12),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let m = laplacian_1d(12).linear_combination(1.0, &laplacian_1d(12), 0.37).unwrap();
            let comb: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = m.matvec(&comb).unwrap();
            let mx = m.matvec(&xs).unwrap();
            let my = m.matvec(&ys).unwrap();
            let scale = norm2(&lhs).max(1.0);
            for i in 0..12 {
                prop_assert!((lhs[i] - (a * mx[i] + b * my[i])).abs() <= 1e-13 * scale);
            }
        }
    }
}
