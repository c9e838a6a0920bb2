//! Q-Wiener noise diagonal in the Neumann eigenbasis, `q_j = lambda_j^{-r}`
//! with `q_0 = 0`, sampled per mode and coupled across time levels.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::fem::{FemFunction, OperatorSet};
use crate::quadrature::CellRule;
use crate::rng::{tag, NormalStream};
use crate::spectral::{build_basis, DomainSpec, EigenBasis, SpectralField};

/// Covariance `q_j = lambda_j^{-decay}` (zero on the constant mode), overall
/// amplitude `sigma`, modes `1..=modes` retained.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub decay: f64,
    pub sigma: f64,
    pub modes: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(decay: f64, sigma: f64, modes: usize, seed: u64) -> Result<Self> {
        if !(decay.is_finite() && decay > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "decay exponent must be positive, got {decay}"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        if modes == 0 {
            return Err(Error::InvalidArgument(
                "noise needs at least one mode".into(),
            ));
        }
        Ok(NoiseSpec {
            decay,
            sigma,
            modes,
            seed,
        })
    }

    /// Basis size needed to carry the noise, constant mode included.
    pub fn basis_len(&self) -> usize {
        self.modes + 1
    }

    pub fn q(&self, j: usize, lambda: f64) -> f64 {
        if j == 0 || lambda <= 0.0 {
            0.0
        } else {
            lambda.powf(-self.decay)
        }
    }

    /// Standard deviation per unit time of each coefficient, `sigma sqrt(q_j)`.
    pub fn scales(&self, basis: &EigenBasis) -> Result<Vec<f64>> {
        self.check_basis(basis)?;
        Ok((0..self.basis_len())
            .map(|j| self.sigma * self.q(j, basis.eigenvalue(j)).sqrt())
            .collect())
    }

    fn check_basis(&self, basis: &EigenBasis) -> Result<()> {
        if basis.len() < self.basis_len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis_len(),
                found: basis.len(),
            });
        }
        Ok(())
    }
}

/// Weyl-law model `lambda_j ~ c j^{2/d}` fitted at mode `j`, and the
/// resulting estimate of `sum_{i > j} lambda_i^e` (midpoint rule on the
/// integral). `None` when the series diverges.
fn weyl_tail(lambda_j: f64, j: usize, dim: usize, e: f64) -> Option<f64> {
    let slope = 2.0 / dim as f64;
    let c = lambda_j / (j as f64).powf(slope);
    let p = slope * e;
    if p >= -1.0 {
        return None;
    }
    Some(c.powf(e) * (j as f64 + 0.5).powf(p + 1.0) / (-(p + 1.0)))
}

/// Smallest `J` such that the Weyl estimate of the omitted trace
/// `sum_{j > J} q_j` is at most `rel_tol` times the retained part.
pub fn truncation(domain: DomainSpec, decay: f64, rel_tol: f64) -> Result<usize> {
    let dim = domain.dim();
    if weyl_tail(1.0, 1, dim, -decay).is_none() {
        return Err(Error::NotAdmissible { exponent: -decay });
    }
    let mut count = 64;
    loop {
        let basis = build_basis(domain, count + 1)?;
        let mut retained = 0.0;
        for j in 1..=count {
            let l = basis.eigenvalue(j);
            retained += l.powf(-decay);
            let tail = weyl_tail(l, j, dim, -decay).unwrap_or(f64::INFINITY);
            if tail <= rel_tol * retained {
                return Ok(j);
            }
        }
        if count > 1 << 22 {
            return Err(Error::InvalidArgument(
                "noise truncation does not converge".into(),
            ));
        }
        count *= 2;
    }
}

/// Exponent `(beta - 2) / 2 + gamma` of `A` in the convolution estimate.
pub fn stco_exponent(beta: f64, gamma: f64) -> f64 {
    (beta - 2.0) / 2.0 + gamma
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// `||A^theta Q^{1/2}||_HS^2` (including `sigma^2`), truncated sum plus
    /// Weyl tail; infinite when the tail diverges.
    pub value: f64,
    pub admissible: bool,
}

/// Hilbert–Schmidt check of `A^theta Q^{1/2}`.
pub fn admissibility(spec: &NoiseSpec, basis: &EigenBasis, theta: f64) -> Result<Admissibility> {
    spec.check_basis(basis)?;
    if spec.sigma == 0.0 {
        return Ok(Admissibility {
            value: 0.0,
            admissible: true,
        });
    }
    let e = 2.0 * theta - spec.decay;
    let s2 = spec.sigma * spec.sigma;
    let partial: f64 = (1..=spec.modes).map(|j| basis.eigenvalue(j).powf(e)).sum();
    let j = spec.modes;
    match weyl_tail(basis.eigenvalue(j), j, basis.domain().dim(), e) {
        Some(tail) => Ok(Admissibility {
            value: s2 * (partial + tail),
            admissible: true,
        }),
        None => Ok(Admissibility {
            value: f64::INFINITY,
            admissible: false,
        }),
    }
}

/// Brownian increments `Delta beta_j` of every retained mode on the finest
/// grid, with coarse levels obtained by exact summation.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    sample: u64,
    fine_steps: usize,
    k_fine: f64,
    factors: Vec<usize>,
    scales: Vec<f64>,
    // mode-major: beta[j * fine_steps + i]
    beta: Vec<f64>,
    checksum: u64,
}

/// Draw the fine increments of sample `sample` on `[0, t_end]` with
/// `fine_steps` steps. Every factor must divide `fine_steps`.
pub fn sample_increments(
    spec: &NoiseSpec,
    basis: &EigenBasis,
    t_end: f64,
    fine_steps: usize,
    factors: &[usize],
    sample: u64,
) -> Result<WienerIncrements> {
    if !(t_end.is_finite() && t_end > 0.0) || fine_steps == 0 {
        return Err(Error::InvalidArgument(
            "need a positive horizon and at least one step".into(),
        ));
    }
    check_factors(fine_steps, factors)?;
    let scales = spec.scales(basis)?;
    let k_fine = t_end / fine_steps as f64;
    let sk = k_fine.sqrt();
    let mut beta = alloc::vec![0.0; scales.len() * fine_steps];
    for (j, row) in beta.chunks_mut(fine_steps).enumerate().skip(1) {
        let mut stream = NormalStream::new(spec.seed, sample, tag::INCREMENTS, j as u64, 0);
        row.iter_mut().for_each(|b| *b = sk * stream.next_pair().0);
    }
    WienerIncrements::from_parts(sample, fine_steps, k_fine, factors.to_vec(), scales, beta)
}

fn check_factors(steps: usize, factors: &[usize]) -> Result<()> {
    match factors.iter().find(|&&f| f == 0 || steps % f != 0) {
        Some(&factor) => Err(Error::FactorMismatch { steps, factor }),
        None => Ok(()),
    }
}

impl WienerIncrements {
    /// Reassemble from stored parts (used when replaying serialized noise).
    pub fn from_parts(
        sample: u64,
        fine_steps: usize,
        k_fine: f64,
        factors: Vec<usize>,
        scales: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        check_factors(fine_steps, &factors)?;
        if beta.len() != scales.len() * fine_steps {
            return Err(Error::DimensionMismatch {
                expected: scales.len() * fine_steps,
                found: beta.len(),
            });
        }
        let checksum = fnv1a(&beta);
        Ok(WienerIncrements {
            sample,
            fine_steps,
            k_fine,
            factors,
            scales,
            beta,
            checksum,
        })
    }

    pub fn sample(&self) -> u64 {
        self.sample
    }

    pub fn fine_steps(&self) -> usize {
        self.fine_steps
    }

    pub fn k_fine(&self) -> f64 {
        self.k_fine
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn modes(&self) -> usize {
        self.scales.len()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Fine increments, mode-major.
    pub fn fine(&self) -> &[f64] {
        &self.beta
    }

    /// FNV-1a hash of the fine increments' bit patterns.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    pub fn steps(&self, factor: usize) -> Result<usize> {
        check_factors(self.fine_steps, &[factor])?;
        Ok(self.fine_steps / factor)
    }

    /// `Delta beta_j` over coarse step `step` of a level with `factor` fine
    /// steps per step, summed in increasing fine index.
    pub fn beta(&self, mode: usize, step: usize, factor: usize) -> f64 {
        let row = &self.beta[mode * self.fine_steps..(mode + 1) * self.fine_steps];
        row[step * factor..(step + 1) * factor]
            .iter()
            .fold(0.0, |acc, b| acc + b)
    }

    /// All coarse increments of one level, mode-major.
    pub fn coarse(&self, factor: usize) -> Result<Vec<f64>> {
        let steps = self.steps(factor)?;
        let mut out = Vec::with_capacity(self.modes() * steps);
        for j in 0..self.modes() {
            for i in 0..steps {
                out.push(self.beta(j, i, factor));
            }
        }
        Ok(out)
    }

    /// Spectral coefficients of `Delta W` over one coarse step.
    pub fn field_increment(&self, step: usize, factor: usize) -> SpectralField {
        SpectralField {
            coeffs: (0..self.modes())
                .map(|j| self.scales[j] * self.beta(j, step, factor))
                .collect(),
        }
    }
}

fn fnv1a(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// `(1 - e^{-y}) / y`, with a Taylor series near zero.
fn expm1_ratio(y: f64) -> f64 {
    if y < 1e-6 {
        1.0 - y / 2.0 + y * y / 6.0 - y * y * y / 24.0 + y * y * y * y / 120.0
    } else {
        -(-y).exp_m1() / y
    }
}

/// Covariance `(Var Delta beta, Cov, Var I)` of the increment and the
/// convolution `I = int_0^k e^{-lambda^2 (k - s)} d beta(s)` over one step.
pub fn convolution_moments(lambda: f64, k: f64) -> (f64, f64, f64) {
    let x = lambda * lambda * k;
    (k, k * expm1_ratio(x), k * expm1_ratio(2.0 * x))
}

/// Conditional variance of `I` given `Delta beta`, divided by `k`.
fn conditional_variance_ratio(x: f64) -> f64 {
    if x < 1e-2 {
        // g(2x) - g(x)^2 expanded; the direct form cancels badly here
        x * x
            * (1.0 / 12.0
                + x * (-1.0 / 12.0 + x * (17.0 / 360.0 + x * (-7.0 / 360.0 + x * 43.0 / 6720.0))))
    } else {
        let g = expm1_ratio(x);
        (expm1_ratio(2.0 * x) - g * g).max(0.0)
    }
}

/// Exact joint sample `(Delta beta, I)` from two independent standard normals.
pub fn convolution_pair(lambda: f64, k: f64, z1: f64, z2: f64) -> (f64, f64) {
    let x = lambda * lambda * k;
    let db = k.sqrt() * z1;
    let i = expm1_ratio(x) * db + (k * conditional_variance_ratio(x)).sqrt() * z2;
    (db, i)
}

/// [`convolution_pair`] driven by the next pair of `stream`.
pub fn sample_convolution_pair(lambda: f64, k: f64, stream: &mut NormalStream) -> (f64, f64) {
    let (z1, z2) = stream.next_pair();
    convolution_pair(lambda, k, z1, z2)
}

/// Precomputed `P_h phi_j` for every noise mode of one mesh.
#[derive(Debug, Clone)]
pub struct NoiseProjector {
    columns: Vec<FemFunction>,
}

/// Gauss rule resolving the highest retained cosine on the mesh cells.
pub fn projection_rule(ops: &OperatorSet, basis: &EigenBasis) -> CellRule {
    let top = basis.modes().last().map_or(0.0, |m| m.eigenvalue.sqrt());
    let per_cell = (top * ops.mesh().h()).ceil() as usize;
    CellRule::with_points(ops.mesh().dim(), (6 + per_cell).min(64))
}

impl NoiseProjector {
    pub fn new(ops: &OperatorSet, basis: &EigenBasis, modes: usize) -> Result<Self> {
        if modes > basis.len() {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: basis.len(),
            });
        }
        let rule = projection_rule(ops, basis);
        let columns = (0..modes)
            .map(|j| {
                let mut values = ops.load_vector(|x| basis.eval_phi(j, x).unwrap_or(0.0), &rule);
                ops.mass_solve_in_place(&mut values)?;
                Ok(FemFunction { values })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseProjector { columns })
    }

    pub fn modes(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &FemFunction {
        &self.columns[j]
    }

    /// `P_h` of a truncated spectral field.
    pub fn project(&self, v: &SpectralField) -> Result<FemFunction> {
        if v.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: v.len(),
            });
        }
        let mut out = FemFunction::zeros(self.columns.first().map_or(0, FemFunction::len));
        for (c, col) in v.coeffs.iter().zip(&self.columns) {
            if *c != 0.0 {
                out.axpy(*c, col);
            }
        }
        Ok(out)
    }
}

/// `P_h Delta W` for a spectral increment.
pub fn project_increment(projector: &NoiseProjector, dw: &SpectralField) -> Result<FemFunction> {
    projector.project(dw)
}
