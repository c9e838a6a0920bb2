//! Gauss rules on the reference segment and triangle.

use alloc::vec::Vec;

use core::f64::consts::PI;
use num_traits::Float;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n and P_{n-1} by the three-term recurrence
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Quadrature on a reference cell. Points are barycentric coordinates
/// (two for segments, three for triangles); weights sum to one, so a cell
/// integral is `measure * sum_q w_q g(x_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl CellRule {
    /// Gauss rule with `n` points on a segment.
    pub fn segment(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let points = x
            .iter()
            .map(|&xi| [0.5 * (1.0 - xi), 0.5 * (1.0 + xi), 0.0])
            .collect();
        let weights = w.iter().map(|wi| 0.5 * wi).collect();
        CellRule { points, weights }
    }

    /// Six-point rule exact for polynomials of degree 4 on triangles.
    pub fn triangle_degree4() -> Self {
        const A: f64 = 0.445_948_490_915_965;
        const WA: f64 = 0.223_381_589_678_011;
        const B: f64 = 0.091_576_213_509_771;
        const WB: f64 = 0.109_951_743_655_322;
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (a, w) in [(A, WA), (B, WB)] {
            let c = 1.0 - 2.0 * a;
            for p in [[a, a, c], [a, c, a], [c, a, a]] {
                points.push(p);
                weights.push(w);
            }
        }
        CellRule { points, weights }
    }

    /// Collapsed (Duffy) tensor Gauss rule with `n * n` points, exact for
    /// degree `2n - 2` on triangles.
    pub fn triangle_collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xi, wi) in x.iter().zip(&w) {
            let u = 0.5 * (1.0 + xi);
            for (xj, wj) in x.iter().zip(&w) {
                let v = 0.5 * (1.0 + xj) * (1.0 - u);
                // area of the reference triangle is 1/2, weights normalized to 1
                let weight = 0.25 * wi * wj * (1.0 - u) * 2.0;
                points.push([1.0 - u - v, u, v]);
                weights.push(weight);
            }
        }
        CellRule { points, weights }
    }

    /// The rule exact to degree 4 used for assembly and nonlinear terms.
    pub fn degree4(dim: usize) -> Self {
        match dim {
            1 => Self::segment(3),
            _ => Self::triangle_degree4(),
        }
    }

    /// A rule with roughly `n` points per direction.
    pub fn with_points(dim: usize, n: usize) -> Self {
        match dim {
            1 => Self::segment(n),
            _ => Self::triangle_collapsed(n),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
