//! Gauss–Legendre rules on `[0, 1]`.

use std::f64::consts::PI;

/// `n`-point Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            x = 0.0;
            dp = 1.0;
        }
        nodes[n - 1 - k] = 0.5 * (x + 1.0);
        weights[n - 1 - k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    if n == 1 {
        weights[0] = 1.0;
    }
    (nodes, weights)
}

/// Tensor rule on the reference square: `(ξ, η, w)` triples summing to 1.
#[derive(Debug, Clone)]
pub struct SquareRule {
    pub points: Vec<(f64, f64, f64)>,
}

impl SquareRule {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                points.push((x[a], x[b], w[a] * w[b]));
            }
        }
        Self { points }
    }

    pub fn midpoint() -> Self {
        Self {
            points: vec![(0.5, 0.5, 1.0)],
        }
    }
}
