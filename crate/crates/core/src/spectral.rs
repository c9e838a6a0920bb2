//! Closed-form eigenpairs of the Neumann Laplacian `A = -Δ` on intervals and
//! rectangles, fractional norms and the fourth-order semigroup
//! `E(t) = exp(-t A^2)`.

use alloc::vec::Vec;

use core::f64::consts::PI;
use num_traits::Float;

use crate::error::{Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    /// `[0, length]`.
    Interval { length: f64 },
    /// `[0, lx] x [0, ly]`.
    Rectangle { lx: f64, ly: f64 },
}

impl DomainSpec {
    pub fn interval(length: f64) -> Result<Self> {
        check_length("length", length)?;
        Ok(DomainSpec::Interval { length })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        check_length("lx", lx)?;
        check_length("ly", ly)?;
        Ok(DomainSpec::Rectangle { lx, ly })
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure `|D|`.
    pub fn measure(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length } => length,
            DomainSpec::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let inside = |v: f64, l: f64| v >= -DOMAIN_SLACK * l && v <= l * (1.0 + DOMAIN_SLACK);
        match *self {
            DomainSpec::Interval { length } => x.len() == 1 && inside(x[0], length),
            DomainSpec::Rectangle { lx, ly } => {
                x.len() == 2 && inside(x[0], lx) && inside(x[1], ly)
            }
        }
    }
}

fn check_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!(
            "{name} must be a positive finite length, got {value}"
        )))
    }
}

/// One Neumann eigenpair. For intervals `index[1]` is always zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub index: [usize; 2],
    pub eigenvalue: f64,
    /// Amplitude of the normalized eigenfunction (`sqrt(2/L)` etc.).
    pub scale: f64,
}

/// Truncated eigenbasis, ordered by nondecreasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    domain: DomainSpec,
    modes: Vec<Mode>,
}

/// Coefficients `c_j = <v, phi_j>` of a field in an [`EigenBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(len: usize) -> Self {
        SpectralField {
            coeffs: alloc::vec![0.0; len],
        }
    }

    /// `amplitude * phi_j` in a basis with `len` modes.
    pub fn mode(len: usize, j: usize, amplitude: f64) -> Result<Self> {
        if j >= len {
            return Err(Error::IndexOutOfRange { index: j, len });
        }
        let mut field = Self::zeros(len);
        field.coeffs[j] = amplitude;
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, gamma: f64) -> Self {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| gamma * c).collect(),
        }
    }
}

/// Which of the two fractional norms to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `|v|_alpha`, the constant mode excluded.
    Dotted,
    /// `||v||_alpha`, which adds `|<v, phi_0>|^2`.
    Full,
}

fn mode_1d(m: usize, length: f64) -> (f64, f64) {
    let lambda = (m as f64 * PI / length).powi(2);
    let scale = if m == 0 {
        (1.0 / length).sqrt()
    } else {
        (2.0 / length).sqrt()
    };
    (lambda, scale)
}

/// Build the first `count` Neumann eigenpairs of `domain`.
///
/// Rectangle ties are broken by ascending `y` index, so `(1, 0)` precedes
/// `(0, 1)` on the unit square.
pub fn build_basis(domain: DomainSpec, count: usize) -> Result<EigenBasis> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "mode count must be at least 1".into(),
        ));
    }
    let modes = match domain {
        DomainSpec::Interval { length } => (0..count)
            .map(|m| {
                let (eigenvalue, scale) = mode_1d(m, length);
                Mode {
                    index: [m, 0],
                    eigenvalue,
                    scale,
                }
            })
            .collect(),
        DomainSpec::Rectangle { lx, ly } => rectangle_modes(lx, ly, count),
    };
    Ok(EigenBasis { domain, modes })
}

fn rectangle_modes(lx: f64, ly: f64, count: usize) -> Vec<Mode> {
    // Grow the eigenvalue cutoff until it captures `count` modes; every mode
    // below the cutoff is then enumerated, so the truncation is exact.
    let mut cutoff = (PI / lx.min(ly)).powi(2) * 4.0;
    loop {
        let mx = ((cutoff.sqrt() * lx / PI).floor() as usize) + 1;
        let my = ((cutoff.sqrt() * ly / PI).floor() as usize) + 1;
        let mut modes = Vec::new();
        for n in 0..my {
            let (ly_val, ly_scale) = mode_1d(n, ly);
            for m in 0..mx {
                let (lx_val, lx_scale) = mode_1d(m, lx);
                let eigenvalue = lx_val + ly_val;
                if eigenvalue <= cutoff {
                    modes.push(Mode {
                        index: [m, n],
                        eigenvalue,
                        scale: lx_scale * ly_scale,
                    });
                }
            }
        }
        if modes.len() >= count {
            modes.sort_by(|a, b| {
                a.eigenvalue
                    .total_cmp(&b.eigenvalue)
                    .then(a.index[1].cmp(&b.index[1]))
                    .then(a.index[0].cmp(&b.index[0]))
            });
            modes.truncate(count);
            return modes;
        }
        cutoff *= 2.0;
    }
}

impl EigenBasis {
    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.modes[j].eigenvalue
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.eigenvalue)
    }

    fn check_field(&self, v: &SpectralField) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Pointwise value of `phi_j(x)`.
    pub fn eval_phi(&self, j: usize, x: &[f64]) -> Result<f64> {
        let mode = self.modes.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.len(),
        })?;
        if x.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                found: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::InvalidArgument(alloc::format!(
                "point {x:?} lies outside the domain"
            )));
        }
        Ok(self.phi_unchecked(mode, x))
    }

    #[inline]
    fn phi_unchecked(&self, mode: &Mode, x: &[f64]) -> f64 {
        match self.domain {
            DomainSpec::Interval { length } => {
                mode.scale * (mode.index[0] as f64 * PI * x[0] / length).cos()
            }
            DomainSpec::Rectangle { lx, ly } => {
                mode.scale
                    * (mode.index[0] as f64 * PI * x[0] / lx).cos()
                    * (mode.index[1] as f64 * PI * x[1] / ly).cos()
            }
        }
    }

    /// All eigenfunction values at `x`, written into `out`.
    pub fn eval_all(&self, x: &[f64], out: &mut [f64]) {
        for (o, mode) in out.iter_mut().zip(&self.modes) {
            *o = self.phi_unchecked(mode, x);
        }
    }

    /// `v(x) = sum_j c_j phi_j(x)`.
    pub fn evaluate(&self, v: &SpectralField, x: &[f64]) -> f64 {
        v.coeffs
            .iter()
            .zip(&self.modes)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, mode)| c * self.phi_unchecked(mode, x))
            .sum()
    }

    /// Spatial mean of a field, `c_0 |D|^{-1/2}`.
    pub fn mean(&self, v: &SpectralField) -> f64 {
        v.coeffs.first().copied().unwrap_or(0.0) / self.domain.measure().sqrt()
    }

    /// Fractional norm `|v|_alpha` or `||v||_alpha`.
    pub fn norm_alpha(&self, v: &SpectralField, alpha: f64, kind: NormKind) -> Result<f64> {
        self.check_field(v)?;
        let c0 = v.coeffs[0];
        if alpha < 0.0 && kind == NormKind::Dotted {
            let scale = v.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
            if c0.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NonzeroMean { mean: c0 });
            }
        }
        let dotted: f64 = v.coeffs[1..]
            .iter()
            .zip(&self.modes[1..])
            .map(|(c, mode)| mode.eigenvalue.powf(alpha) * c * c)
            .sum();
        Ok(match kind {
            NormKind::Dotted => dotted.sqrt(),
            NormKind::Full => (dotted + c0 * c0).sqrt(),
        })
    }

    /// `E(t) v`: each coefficient damped by `exp(-t lambda_j^2)`.
    pub fn semigroup_apply(&self, v: &SpectralField, t: f64) -> Result<SpectralField> {
        self.check_field(v)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "time must be nonnegative, got {t}"
            )));
        }
        let coeffs = v
            .coeffs
            .iter()
            .zip(&self.modes)
            .map(|(c, mode)| c * (-t * mode.eigenvalue * mode.eigenvalue).exp())
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// `A^p v` for a real power `p`; the constant mode is mapped to zero when
    /// `p > 0` and kept when `p == 0`.
    pub fn apply_power(&self, v: &SpectralField, p: f64) -> Result<SpectralField> {
        self.check_field(v)?;
        let coeffs = v
            .coeffs
            .iter()
            .zip(&self.modes)
            .map(|(c, mode)| {
                if p == 0.0 {
                    *c
                } else if mode.eigenvalue == 0.0 {
                    0.0
                } else {
                    c * mode.eigenvalue.powf(p)
                }
            })
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// Empirical `sup_{t, j >= 1} t^{alpha/2} ||A^{alpha} E(t) phi_j||`.
    ///
    /// Each mode contributes `s^{alpha/2} exp(-s)` with `s = t lambda_j^2`; the
    /// supremum is located by a logarithmic grid in `t` followed by a golden
    /// section refinement. The exact value is `(alpha/2)^{alpha/2} e^{-alpha/2}`.
    pub fn smoothing_constant_probe(&self, alpha: f64) -> Result<f64> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        let mut best = 0.0_f64;
        for mode in self.modes.iter().skip(1) {
            let lam = mode.eigenvalue;
            if lam <= 0.0 {
                continue;
            }
            let value = |t: f64| {
                if t == 0.0 {
                    if alpha == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    t.powf(0.5 * alpha) * lam.powf(alpha) * (-t * lam * lam).exp()
                }
            };
            best = best.max(value(0.0));
            let (lo, hi) = (-8.0_f64, 2.0_f64);
            let samples = 200;
            let mut arg = 0.0;
            let mut top = f64::NEG_INFINITY;
            for i in 0..=samples {
                let s = 10f64.powf(lo + (hi - lo) * i as f64 / samples as f64);
                let t = s / (lam * lam);
                let v = value(t);
                if v > top {
                    top = v;
                    arg = s;
                }
            }
            let (mut a, mut b) = (arg / 1.2, arg * 1.2);
            let golden = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..100 {
                let c = b - golden * (b - a);
                let d = a + golden * (b - a);
                if value(c / (lam * lam)) > value(d / (lam * lam)) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best = best.max(top).max(value(0.5 * (a + b) / (lam * lam)));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    extern crate std;
    use super::*;
    use crate::quadrature::gauss_legendre;

    fn unit() -> EigenBasis {
        build_basis(DomainSpec::interval(1.0).unwrap(), 8).unwrap()
    }

    #[test]
    fn interval_eigenvalues() {
        let b = build_basis(DomainSpec::interval(1.0).unwrap(), 3).unwrap();
        let l: Vec<f64> = b.eigenvalues().collect();
        assert_eq!(l[0], 0.0);
        assert!((l[1] - PI * PI).abs() < 1e-13);
        assert!((l[2] - 4.0 * PI * PI).abs() < 1e-12);

        let b = build_basis(DomainSpec::interval(2.0).unwrap(), 2).unwrap();
        assert!((b.eigenvalue(1) - 2.4674011002723395).abs() < 1e-12);
    }

    #[test]
    fn rectangle_eigenvalues_and_tie_break() {
        let b = build_basis(DomainSpec::rectangle(1.0, 1.0).unwrap(), 4).unwrap();
        let l: Vec<f64> = b.eigenvalues().collect();
        let p2 = PI * PI;
        assert_eq!(l[0], 0.0);
        assert!((l[1] - p2).abs() < 1e-12 && (l[2] - p2).abs() < 1e-12);
        assert!((l[3] - 2.0 * p2).abs() < 1e-12);
        assert_eq!(b.modes()[1].index, [1, 0]);
        assert_eq!(b.modes()[2].index, [0, 1]);
    }

    #[test]
    fn rectangle_truncation_is_the_lowest_part_of_the_spectrum() {
        let b = build_basis(DomainSpec::rectangle(1.0, 0.5).unwrap(), 40).unwrap();
        let l: Vec<f64> = b.eigenvalues().collect();
        assert!(l.windows(2).all(|w| w[0] <= w[1]));
        let mut all = Vec::new();
        for m in 0..40 {
            for n in 0..40 {
                all.push((m as f64 * PI).powi(2) + (n as f64 * PI / 0.5).powi(2));
            }
        }
        all.sort_by(f64::total_cmp);
        for (a, b) in l.iter().zip(&all) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn pointwise_values() {
        let b = unit();
        assert!((b.eval_phi(0, &[0.3]).unwrap() - 1.0).abs() < 1e-15);
        assert!((b.eval_phi(1, &[0.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(b.eval_phi(1, &[0.5]).unwrap().abs() < 1e-15);
        assert!(matches!(
            b.eval_phi(8, &[0.5]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(b.eval_phi(1, &[1.5]).is_err());

        let r = build_basis(DomainSpec::rectangle(2.0, 3.0).unwrap(), 5).unwrap();
        assert!((r.eval_phi(0, &[1.0, 1.0]).unwrap() - 1.0 / 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn orthonormality_by_quadrature() {
        // 40 Gauss points per unit-length panel, 16 panels: far beyond the
        // four points per half-wavelength the highest mode needs.
        let (pts, wts) = gauss_legendre(40);
        let b = build_basis(DomainSpec::interval(1.5).unwrap(), 12).unwrap();
        let panels = 16;
        let h = 1.5 / panels as f64;
        for j in 0..12 {
            for l in 0..12 {
                let mut s = 0.0;
                for p in 0..panels {
                    for (x, w) in pts.iter().zip(&wts) {
                        let xx = h * (p as f64 + 0.5 * (x + 1.0));
                        s += 0.5
                            * h
                            * w
                            * b.eval_phi(j, &[xx]).unwrap()
                            * b.eval_phi(l, &[xx]).unwrap();
                    }
                }
                let delta = if j == l { 1.0 } else { 0.0 };
                assert!((s - delta).abs() < 1e-10, "({j},{l}) -> {s}");
            }
        }
    }

    #[test]
    fn norm_examples() {
        let b = unit();
        let phi1 = SpectralField::mode(8, 1, 1.0).unwrap();
        assert!((b.norm_alpha(&phi1, 1.0, NormKind::Dotted).unwrap() - PI).abs() < 1e-13);

        let phi0 = SpectralField::mode(8, 0, 1.0).unwrap();
        assert_eq!(b.norm_alpha(&phi0, 0.0, NormKind::Dotted).unwrap(), 0.0);
        assert!((b.norm_alpha(&phi0, 0.0, NormKind::Full).unwrap() - 1.0).abs() < 1e-15);

        let mut v = SpectralField::zeros(8);
        v.coeffs[1] = 1.0;
        v.coeffs[2] = 1.0;
        let want = (PI.powi(-2) + (2.0 * PI).powi(-2)).sqrt();
        assert!((b.norm_alpha(&v, -1.0, NormKind::Dotted).unwrap() - want).abs() < 1e-14);

        assert!(matches!(
            b.norm_alpha(&phi0, -1.0, NormKind::Dotted),
            Err(Error::NonzeroMean { .. })
        ));
    }

    #[test]
    fn semigroup_examples() {
        let b = unit();
        let mut v = SpectralField::zeros(8);
        v.coeffs[0] = 0.7;
        v.coeffs[1] = 1.0;
        v.coeffs[3] = -0.2;
        assert_eq!(b.semigroup_apply(&v, 0.0).unwrap(), v);
        let w = b.semigroup_apply(&v, 3.0).unwrap();
        assert_eq!(w.coeffs[0], 0.7);

        let phi1 = SpectralField::mode(8, 1, 1.0).unwrap();
        let e = b.semigroup_apply(&phi1, 1e-3).unwrap().coeffs[1];
        // classical RK4 on u' = -lambda^2 u over [0, 1e-3]
        let rate = PI.powi(4);
        let steps = 1000;
        let dt = 1e-3 / steps as f64;
        let mut u = 1.0_f64;
        for _ in 0..steps {
            let k1 = -rate * u;
            let k2 = -rate * (u + 0.5 * dt * k1);
            let k3 = -rate * (u + 0.5 * dt * k2);
            let k4 = -rate * (u + dt * k3);
            u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((e - u).abs() < 1e-12);
        assert!((e - 0.9071).abs() < 1e-4);
        assert!(b.semigroup_apply(&phi1, -1.0).is_err());
    }

    #[test]
    fn smoothing_probe_examples() {
        let b = unit();
        assert!((b.smoothing_constant_probe(0.0).unwrap() - 1.0).abs() < 1e-12);
        let single = build_basis(DomainSpec::interval(1.0).unwrap(), 2).unwrap();
        let e2 = single.smoothing_constant_probe(2.0).unwrap();
        assert!((e2 - (-1.0f64).exp()).abs() < 1e-9);
        // 1-D maximization oracle: dense scan of s^{1/2} e^{-s}
        let oracle = (1..=200_000)
            .map(|i| {
                let s = i as f64 * 1e-5;
                s.sqrt() * (-s).exp()
            })
            .fold(0.0_f64, f64::max);
        let e1 = b.smoothing_constant_probe(1.0).unwrap();
        assert!((e1 - oracle).abs() < 1e-9, "{e1} vs {oracle}");
        assert!((e1 - 0.4289).abs() < 1e-4);
    }
}
