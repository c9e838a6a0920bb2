//! Quartic potentials `F`, their derivatives and the structural constants
//! `C_0` (dissipativity) and `c_1^2` (lower bound of `F''`).

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::fem::{FemFunction, OperatorSet};

/// `F(s) = sum_i a_i s^i` with `a_4 > 0`, or the zero potential for linear
/// runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    coeffs: [f64; 5],
    c0_big: f64,
    c1_sq: f64,
}

impl Potential {
    /// A quartic with coefficients listed constant term first.
    pub fn new(coeffs: [f64; 5]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential(
                "coefficients must be finite".into(),
            ));
        }
        if !(coeffs[4] > 0.0) {
            return Err(Error::InvalidPotential(alloc::format!(
                "F must have degree 4 with positive leading coefficient, got {}",
                coeffs[4]
            )));
        }
        let [_, a1, a2, a3, a4] = coeffs;
        // min of s f(s) = a1 s + 2 a2 s^2 + 3 a3 s^3 + 4 a4 s^4 over its critical points
        let sf = |s: f64| s * (a1 + s * (2.0 * a2 + s * (3.0 * a3 + s * 4.0 * a4)));
        let min_sf = real_cubic_roots([a1, 4.0 * a2, 9.0 * a3, 16.0 * a4])
            .into_iter()
            .map(sf)
            .fold(0.0, f64::min);
        // F'' = 12 a4 s^2 + 6 a3 s + 2 a2 is minimal at s = -a3 / (4 a4)
        let s = -a3 / (4.0 * a4);
        let min_f2 = 2.0 * a2 + s * (6.0 * a3 + s * 12.0 * a4);
        Ok(Potential {
            coeffs,
            c0_big: -min_sf,
            c1_sq: (-min_f2).max(0.0),
        })
    }

    /// `F(s) = (s^2 - 1)^2 / 4`.
    pub fn double_well() -> Self {
        Self::new([0.25, 0.0, -0.5, 0.0, 0.25]).expect("valid quartic")
    }

    /// `F = 0`, for linear runs only.
    pub fn none() -> Self {
        Potential {
            coeffs: [0.0; 5],
            c0_big: 0.0,
            c1_sq: 0.0,
        }
    }

    pub fn coeffs(&self) -> [f64; 5] {
        self.coeffs
    }

    pub fn is_linear(&self) -> bool {
        self.coeffs == [0.0; 5]
    }

    #[inline]
    pub fn big_f(&self, s: f64) -> f64 {
        let a = &self.coeffs;
        a[0] + s * (a[1] + s * (a[2] + s * (a[3] + s * a[4])))
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        let a = &self.coeffs;
        a[1] + s * (2.0 * a[2] + s * (3.0 * a[3] + s * 4.0 * a[4]))
    }

    #[inline]
    pub fn f_prime(&self, s: f64) -> f64 {
        let a = &self.coeffs;
        2.0 * a[2] + s * (6.0 * a[3] + s * 12.0 * a[4])
    }

    /// Pointwise dissipativity constant: `s f(s) >= -c` for all `s`. The
    /// integrated constant is `C_0 = |D| c`.
    pub fn dissipativity_constant(&self) -> f64 {
        self.c0_big
    }

    /// `c_1^2 = max(0, -min F'')`.
    pub fn c1_squared(&self) -> f64 {
        self.c1_sq
    }

    /// `C` with `|f(x) - f(y)| <= C (1 + x^2 + y^2) |x - y|`.
    pub fn local_lipschitz(&self) -> f64 {
        let a = &self.coeffs;
        (2.0 * a[2]).abs() + (3.0 * a[3]).abs() + 6.0 * a[4].abs()
    }

    /// `int F(v)`, exact for P1 `v` with the degree-4 rule.
    pub fn functional(&self, ops: &OperatorSet, v: &FemFunction) -> f64 {
        let mesh = ops.mesh();
        let mut acc = 0.0;
        ops.for_each_quadrature_point(ops.rule(), |c, bary, _, w| {
            let s: f64 = mesh
                .cell(c)
                .iter()
                .zip(bary)
                .map(|(&i, l)| l * v.values[i])
                .sum();
            acc += w * self.big_f(s);
        });
        acc
    }

    /// `b_i = int f(v) phi_i`.
    pub fn load(&self, ops: &OperatorSet, v: &FemFunction) -> Vec<f64> {
        let mesh = ops.mesh();
        let mut b = alloc::vec![0.0; ops.dofs()];
        if self.is_linear() {
            return b;
        }
        ops.for_each_quadrature_point(ops.rule(), |c, bary, _, w| {
            let cell = mesh.cell(c);
            let s: f64 = cell.iter().zip(bary).map(|(&i, l)| l * v.values[i]).sum();
            let fs = w * self.f(s);
            for (&i, l) in cell.iter().zip(bary) {
                b[i] += fs * l;
            }
        });
        b
    }

    /// Visit the entries `B'_il = int f'(v) phi_i phi_l` cell by cell.
    pub fn for_each_jacobian_entry(
        &self,
        ops: &OperatorSet,
        v: &FemFunction,
        mut add: impl FnMut(usize, usize, f64),
    ) {
        if self.is_linear() {
            return;
        }
        let mesh = ops.mesh();
        let rule = ops.rule();
        let n = mesh.dim() + 1;
        for (c, &vol) in ops.cell_measures().iter().enumerate() {
            let nodes = mesh.cell(c);
            let mut local = [[0.0; 3]; 3];
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let s: f64 = nodes.iter().zip(bary).map(|(&i, l)| l * v.values[i]).sum();
                let d = vol * w * self.f_prime(s);
                for a in 0..n {
                    for b in 0..n {
                        local[a][b] += d * bary[a] * bary[b];
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    add(nodes[a], nodes[b], local[a][b]);
                }
            }
        }
    }

    /// `min_v <f(v), v> + C_0` over `samples`; nonnegative when the
    /// dissipativity bound holds.
    pub fn dissipativity_check(&self, ops: &OperatorSet, samples: &[FemFunction]) -> f64 {
        let c0 = ops.measure() * self.c0_big;
        samples
            .iter()
            .map(|v| {
                let b = self.load(ops, v);
                b.iter().zip(&v.values).map(|(a, x)| a * x).sum::<f64>() + c0
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Real roots of `c0 + c1 s + c2 s^2 + c3 s^3` with `c3 != 0`.
fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let (a, b, d) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    // depressed cubic t^3 + p t + q with s = t - a / 3
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots: Vec<f64> = if disc > 0.0 {
        let sq = disc.sqrt();
        alloc::vec![(-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt()]
    } else if p == 0.0 {
        alloc::vec![0.0]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    };
    let poly = |s: f64| c[0] + s * (c[1] + s * (c[2] + s * c[3]));
    let dpoly = |s: f64| c[1] + s * (2.0 * c[2] + s * 3.0 * c[3]);
    for t in roots.iter_mut() {
        let mut s = *t - a / 3.0;
        for _ in 0..4 {
            let d = dpoly(s);
            if d == 0.0 {
                break;
            }
            s -= poly(s) / d;
        }
        *t = s;
    }
    roots
}
