//! Sparse storage and the direct/iterative solvers used by the scheme.
//!
//! Meshes produced by the structured generators have small bandwidth in
//! their natural vertex order, so banded Cholesky (SPD blocks) and banded LU
//! with partial pivoting (the Newton system) are exact and cheap.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, _)| c.abs_diff(i)))
            .max()
            .unwrap_or(0)
    }

    /// Maximal `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(c, v)| (i, c, v)))
            .map(|(i, c, v)| (v - self.get(c, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = alloc::vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                d[i * self.n + c] = v;
            }
        }
        d
    }
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row-major lower band: l[i * (bw + 1) + (j + bw - i)] = L_ij for i - bw <= j <= i
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factor the leading `n x n` block of `a` (`n <= a.n()`).
    pub fn factor_leading(a: &CsrMatrix, n: usize) -> Result<Self> {
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = alloc::vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    l[i * w + (j + bw - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Factorization { pivot: i, value: s });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_leading(a, a.n())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Overwrite `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= self.l[k * w + (i + bw - k)] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }
}

/// General band matrix with LU factorization and partial pivoting.
///
/// Storage follows the LAPACK `gbtrf` layout: `kl` extra superdiagonals are
/// reserved for pivoting fill.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // column-major band, ld = 2 kl + ku + 1; A_ij lives at (kl + ku + i - j, j)
    ab: Vec<f64>,
    pivots: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ab: alloc::vec![0.0; ld * n],
            pivots: alloc::vec![0; n],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn ld(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ld()
    }

    pub fn clear(&mut self) {
        self.ab.iter_mut().for_each(|v| *v = 0.0);
        self.factored = false;
    }

    /// Add `v` to entry `(i, j)`, which must lie inside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            i <= j + self.kl && j <= i + self.ku,
            "({i}, {j}) outside band"
        );
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j + self.kl || j > i + self.ku {
            0.0
        } else {
            self.ab[self.idx(i, j)]
        }
    }

    /// `y = A x` (only valid before factorization).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert!(!self.factored);
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku + 1).min(self.n);
            *yi = (j0..j1).map(|j| self.ab[self.idx(i, j)] * x[j]).sum();
        }
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(&mut self) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let kv = self.ku + kl;
        let scale = self.ab.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.idx(j, j)].abs();
            for i in (j + 1)..=last {
                let v = self.ab[self.idx(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.pivots[j] = p;
            if !(best > 1e-300 && best > scale * 1e-18) {
                return Err(Error::Factorization {
                    pivot: j,
                    value: best,
                });
            }
            let col_end = (j + kv).min(n - 1);
            if p != j {
                for c in j..=col_end {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.ab.swap(a, b);
                }
            }
            let d = self.ab[self.idx(j, j)];
            for i in (j + 1)..=last {
                let k = self.idx(i, j);
                self.ab[k] /= d;
            }
            for c in (j + 1)..=col_end {
                let u = self.ab[self.idx(j, c)];
                if u != 0.0 {
                    for i in (j + 1)..=last {
                        let m = self.ab[self.idx(i, j)];
                        let k = self.idx(i, c);
                        self.ab[k] -= m * u;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Overwrite `b` with `A^{-1} b`; requires [`BandMatrix::factor`].
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert!(self.factored, "band matrix must be factored before solving");
        let (n, kl) = (self.n, self.kl);
        let kv = self.ku + kl;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(p, j);
            }
            let last = (j + kl).min(n - 1);
            let bj = b[j];
            for (i, bi) in b.iter_mut().enumerate().take(last + 1).skip(j + 1) {
                *bi -= self.ab[self.idx(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.ab[self.idx(i, j)] * bj;
            }
        }
    }
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator, stopping at relative residual `rtol`.
///
/// `project` is applied to every residual and search direction; pass the
/// identity for SPD problems or a mean-removing projection for singular
/// Neumann problems.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    precondition: impl Fn(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = rhs.len();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut r = alloc::vec![0.0; n];
    let mut ap = alloc::vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = rhs[i] - ap[i];
    }
    project(&mut r);
    let bnorm = norm(rhs).max(f64::MIN_POSITIVE);
    if norm(&r) <= rtol * bnorm {
        return Ok(0);
    }
    let mut z = alloc::vec![0.0; n];
    precondition(&r, &mut z);
    project(&mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SolverFailed {
                iterations: it,
                residual: norm(&r) / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        let res = norm(&r) / bnorm;
        if res <= rtol {
            return Ok(it);
        }
        precondition(&r, &mut z);
        project(&mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailed {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_plus_shift(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, alloc::vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn band_cholesky_solves() {
        let a = laplacian_plus_shift(30, 0.1);
        let chol = BandCholesky::factor(&a).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.mul(&x);
        chol.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
        let bad = laplacian_plus_shift(4, -3.0);
        assert!(matches!(
            BandCholesky::factor(&bad),
            Err(Error::Factorization { .. })
        ));
    }

    #[test]
    fn band_lu_with_pivoting() {
        // nonsymmetric, zero leading diagonal forces a row swap
        let n = 12;
        let mut m = BandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            if i > 0 {
                m.add(i, i, 0.5 + i as f64);
            }
            if i + 1 < n {
                m.add(i, i + 1, 1.0);
            }
            if i >= 1 {
                m.add(i, i - 1, 3.0);
            }
            if i >= 2 {
                m.add(i, i - 2, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let mut b = alloc::vec![0.0; n];
        m.matvec(&x, &mut b);
        m.factor().unwrap();
        m.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn cg_matches_direct() {
        let a = laplacian_plus_shift(40, 0.01);
        let rhs: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        let mut x = alloc::vec![0.0; 40];
        let diag = a.diagonal();
        conjugate_gradient(
            |v, out| a.matvec(v, out),
            |r, z| {
                z.iter_mut()
                    .zip(r)
                    .zip(&diag)
                    .for_each(|((z, r), d)| *z = r / d)
            },
            |_| {},
            &rhs,
            &mut x,
            1e-12,
            500,
        )
        .unwrap();
        let mut direct = rhs.clone();
        BandCholesky::factor(&a)
            .unwrap()
            .solve_in_place(&mut direct);
        for (u, v) in x.iter().zip(&direct) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}
