//! Dense generalized eigensolve `K phi = lambda M phi` of the discrete
//! Laplacian, used for discrete fractional norms and as an exact oracle for
//! the linear scheme.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fem::{FemFunction, OperatorSet};

/// Largest number of degrees of freedom accepted by the dense path.
pub const DENSE_DOF_LIMIT: usize = 4000;

const MEAN_TOL: f64 = 1e-10;

/// Full spectrum of `A_h`, eigenvalues ascending, eigenvectors `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct DiscreteSpectrum {
    n: usize,
    eigenvalues: Vec<f64>,
    // column-major, column j is phi_{h,j}
    vectors: Vec<f64>,
    measure: f64,
}

impl DiscreteSpectrum {
    pub fn compute(ops: &OperatorSet) -> Result<Self> {
        let n = ops.dofs();
        if n > DENSE_DOF_LIMIT {
            return Err(Error::DenseLimitExceeded {
                dofs: n,
                limit: DENSE_DOF_LIMIT,
            });
        }
        let m = DMatrix::from_row_slice(n, n, &ops.mass().to_dense());
        let k = DMatrix::from_row_slice(n, n, &ops.stiffness().to_dense());
        let chol = Cholesky::new(m).ok_or(Error::Factorization {
            pivot: 0,
            value: f64::NAN,
        })?;
        let l = chol.l();
        // C = L^{-1} K L^{-T}
        let y = l.solve_lower_triangular(&k).ok_or(Error::Factorization {
            pivot: 0,
            value: 0.0,
        })?;
        let c = l
            .solve_lower_triangular(&y.transpose())
            .ok_or(Error::Factorization {
                pivot: 0,
                value: 0.0,
            })?;
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let u = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        let phi = l
            .transpose()
            .solve_upper_triangular(&u)
            .ok_or(Error::Factorization {
                pivot: 0,
                value: 0.0,
            })?;
        let measure = ops.measure();
        let mut vectors = phi.as_slice().to_vec();
        // the kernel is exactly the constants; pin the representative
        vectors[..n]
            .iter_mut()
            .for_each(|v| *v = 1.0 / measure.sqrt());
        let mut eigenvalues: Vec<f64> =
            order.iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();
        eigenvalues[0] = 0.0;
        Ok(DiscreteSpectrum {
            n,
            eigenvalues,
            vectors,
            measure,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.n..(j + 1) * self.n]
    }

    /// `c_j = <v, phi_{h,j}>_M`.
    pub fn coefficients(&self, ops: &OperatorSet, v: &FemFunction) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        let mv = ops.mass().mul(&v.values);
        Ok((0..self.n).map(|j| dot(self.vector(j), &mv)).collect())
    }

    /// `sum_j c_j phi_{h,j}`.
    pub fn synthesize(&self, coeffs: &[f64]) -> FemFunction {
        let mut values = alloc::vec![0.0; self.n];
        for (j, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                values
                    .iter_mut()
                    .zip(self.vector(j))
                    .for_each(|(v, p)| *v += c * p);
            }
        }
        FemFunction { values }
    }

    /// `g(A_h) v`, evaluated mode by mode.
    pub fn apply_fn(
        &self,
        ops: &OperatorSet,
        v: &FemFunction,
        g: impl Fn(f64) -> f64,
    ) -> Result<FemFunction> {
        let mut c = self.coefficients(ops, v)?;
        c.iter_mut()
            .zip(&self.eigenvalues)
            .for_each(|(c, &l)| *c *= g(l));
        Ok(self.synthesize(&c))
    }

    /// `|v|_{alpha,h} = ||A_h^{alpha/2} v||`.
    pub fn norm_alpha(&self, ops: &OperatorSet, v: &FemFunction, alpha: f64) -> Result<f64> {
        let c = self.coefficients(ops, v)?;
        if alpha < 0.0 && c[0].abs() > MEAN_TOL {
            return Err(Error::NonzeroMean {
                mean: c[0] / self.measure.sqrt(),
            });
        }
        let s: f64 = c
            .iter()
            .zip(&self.eigenvalues)
            .skip(1)
            .filter(|(_, &l)| l > 0.0)
            .map(|(c, &l)| l.powf(alpha) * c * c)
            .sum();
        Ok(s.sqrt())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh};
    use core::f64::consts::PI;

    fn interval(n: usize) -> OperatorSet {
        assemble(build_interval_mesh(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn eigenpairs_are_m_orthonormal() {
        let ops = assemble(build_rectangle_mesh(1.0, 2.0, 4, 6).unwrap()).unwrap();
        let s = DiscreteSpectrum::compute(&ops).unwrap();
        let n = s.len();
        for i in 0..n {
            let ki = ops.stiffness().mul(s.vector(i));
            let mi = ops.mass().mul(s.vector(i));
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(s.vector(j), &mi) - want).abs() < 1e-9);
            }
            let res = ki
                .iter()
                .zip(&mi)
                .map(|(k, m)| (k - s.eigenvalue(i) * m).abs())
                .fold(0.0, f64::max);
            assert!(
                res < 1e-9 * (1.0 + s.eigenvalue(i)),
                "residual {res} for {i}"
            );
        }
        assert_eq!(s.eigenvalue(0), 0.0);
        assert_eq!(s.eigenvalues().iter().filter(|&&l| l < 1e-8).count(), 1);
    }

    #[test]
    fn first_eigenvalue_converges_at_second_order() {
        let errs: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| {
                DiscreteSpectrum::compute(&interval(n))
                    .unwrap()
                    .eigenvalue(1)
                    - PI * PI
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] > 0.0);
            let rate = (w[0] / w[1]).log2();
            assert!((1.9..=2.1).contains(&rate), "rate {rate}");
        }
    }

    #[test]
    fn norms_match_quadratic_forms() {
        let ops = interval(16);
        let s = DiscreteSpectrum::compute(&ops).unwrap();
        let v = FemFunction {
            values: (0..17).map(|i| ((i * 7) % 5) as f64 - 1.3).collect(),
        };
        let k_form = ops.stiffness().bilinear(&v.values, &v.values).sqrt();
        assert!((s.norm_alpha(&ops, &v, 1.0).unwrap() - k_form).abs() < 1e-9);
        let mean = ops.mean(&v);
        let centered = FemFunction {
            values: v.values.iter().map(|x| x - mean).collect(),
        };
        assert!((s.norm_alpha(&ops, &v, 0.0).unwrap() - ops.l2_norm(&centered)).abs() < 1e-9);
        assert!(matches!(
            s.norm_alpha(&ops, &v, -1.0),
            Err(Error::NonzeroMean { .. })
        ));
        let av = ops.apply_ah(&centered).unwrap();
        let lhs = s.norm_alpha(&ops, &av, -1.0).unwrap();
        assert!((lhs - k_form).abs() < 1e-9);
        assert!(
            (s.norm_alpha(&ops, &centered, -1.0).unwrap() - ops.negative_norm(&v).unwrap()).abs()
                < 1e-9
        );
    }

    #[test]
    fn dense_limit_is_enforced() {
        let ops = interval(DENSE_DOF_LIMIT);
        assert!(matches!(
            DiscreteSpectrum::compute(&ops),
            Err(Error::DenseLimitExceeded { .. })
        ));
    }
}
