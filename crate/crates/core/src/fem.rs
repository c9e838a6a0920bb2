//! P1 finite elements: assembly of the mass matrix `M` and stiffness matrix
//! `K`, the discrete Laplacian `A_h = M^{-1} K`, and the `L2` and Ritz
//! projections onto the finite element space `S_h`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::CellRule;
use crate::sparse::{conjugate_gradient, BandCholesky, CsrMatrix};
use crate::spectral::{EigenBasis, NormKind, SpectralField};

const ITERATIVE_RTOL: f64 = 1e-12;

/// Nodal coefficients of a P1 function in the hat-function basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    pub values: Vec<f64>,
}

impl FemFunction {
    pub fn zeros(n: usize) -> Self {
        FemFunction {
            values: alloc::vec![0.0; n],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        FemFunction {
            values: alloc::vec![c; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axpy(&mut self, a: f64, other: &FemFunction) {
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(x, y)| *x += a * y);
    }

    pub fn sub(&self, other: &FemFunction) -> FemFunction {
        FemFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &FemFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Solver for the singular Neumann problem `K c = g` with the mean of `c`
/// prescribed through a Lagrange multiplier.
///
/// The bordered system `[[K, m], [m^T, 0]]` (with `m = M 1`) is eliminated
/// onto the last vertex and the multiplier: the leading block `K_11` is SPD
/// for a connected mesh, leaving a symmetric 2 x 2 Schur complement.
#[derive(Debug, Clone)]
struct NeumannSolver {
    n: usize,
    k11: Option<BandCholesky>,
    k_last: Vec<f64>,
    m: Vec<f64>,
    w_k: Vec<f64>,
    w_m: Vec<f64>,
    schur: [[f64; 2]; 2],
}

impl NeumannSolver {
    fn new(stiffness: &CsrMatrix, m: &[f64]) -> Self {
        let n = stiffness.n();
        let last = n - 1;
        let k_last: Vec<f64> = (0..last).map(|i| stiffness.get(i, last)).collect();
        let k_nn = stiffness.get(last, last);
        let k11 = BandCholesky::factor_leading(stiffness, last).ok();
        let (mut w_k, mut w_m) = (k_last.clone(), m[..last].to_vec());
        let mut schur = [[0.0; 2]; 2];
        if let Some(f) = &k11 {
            f.solve_in_place(&mut w_k);
            f.solve_in_place(&mut w_m);
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            schur = [
                [k_nn - dot(&k_last, &w_k), m[last] - dot(&k_last, &w_m)],
                [m[last] - dot(&m[..last], &w_k), -dot(&m[..last], &w_m)],
            ];
        }
        NeumannSolver {
            n,
            k11,
            k_last,
            m: m.to_vec(),
            w_k,
            w_m,
            schur,
        }
    }

    fn solve(&self, stiffness: &CsrMatrix, g: &[f64], total: f64) -> Result<Vec<f64>> {
        let last = self.n - 1;
        let Some(k11) = &self.k11 else {
            return self.solve_iterative(stiffness, g, total);
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut u = g[..last].to_vec();
        k11.solve_in_place(&mut u);
        let r0 = g[last] - dot(&self.k_last, &u);
        let r1 = total - dot(&self.m[..last], &u);
        let [[a, b], [c, d]] = self.schur;
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Factorization {
                pivot: last,
                value: det,
            });
        }
        let c_last = (r0 * d - b * r1) / det;
        let mult = (a * r1 - c * r0) / det;
        let mut sol = u;
        for i in 0..last {
            sol[i] -= c_last * self.w_k[i] + mult * self.w_m[i];
        }
        sol.push(c_last);
        Ok(sol)
    }

    /// Projected CG on the zero-mean subspace, then a constant shift to hit
    /// the prescribed mean.
    fn solve_iterative(&self, stiffness: &CsrMatrix, g: &[f64], total: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let measure: f64 = self.m.iter().sum();
        let m = &self.m;
        // remove the incompatible part of g (orthogonal to constants)
        let gsum: f64 = g.iter().sum();
        let rhs: Vec<f64> = g.iter().map(|v| v - gsum / n as f64).collect();
        let diag = stiffness.diagonal();
        let mut x = alloc::vec![0.0; n];
        conjugate_gradient(
            |v, out| stiffness.matvec(v, out),
            |r, z| {
                z.iter_mut()
                    .zip(r)
                    .zip(&diag)
                    .for_each(|((z, r), d)| *z = r / d)
            },
            |v| {
                let s: f64 = v.iter().sum::<f64>() / n as f64;
                v.iter_mut().for_each(|x| *x -= s);
            },
            &rhs,
            &mut x,
            ITERATIVE_RTOL,
            10 * n + 100,
        )?;
        let shift = (total - x.iter().zip(m).map(|(a, b)| a * b).sum::<f64>()) / measure;
        x.iter_mut().for_each(|v| *v += shift);
        Ok(x)
    }
}

/// Assembled operators of one mesh together with cached factorizations.
///
/// Immutable after construction, so a single instance can be shared by
/// concurrent Monte Carlo workers.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    mesh: Mesh,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    mass_factor: Option<BandCholesky>,
    neumann: NeumannSolver,
    ones_mass: Vec<f64>,
    measure: f64,
    cell_measures: Vec<f64>,
    rule: CellRule,
}

/// Assemble `M` and `K` with exact P1 element integrals.
pub fn assemble(mesh: Mesh) -> Result<OperatorSet> {
    let n = mesh.num_vertices();
    let dim = mesh.dim();
    let scale = mesh.h().max(f64::MIN_POSITIVE).powi(dim as i32);
    let mut mt = Vec::with_capacity(mesh.num_cells() * (dim + 1) * (dim + 1));
    let mut kt = Vec::with_capacity(mt.capacity());
    let mut cell_measures = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let signed = mesh.cell_measure(c);
        let vol = signed.abs();
        if !(vol > 1e-12 * scale) {
            return Err(Error::DegenerateCell {
                cell: c,
                measure: signed,
            });
        }
        cell_measures.push(vol);
        let cell = mesh.cell(c);
        match dim {
            1 => {
                for a in 0..2 {
                    for b in 0..2 {
                        let same = a == b;
                        mt.push((cell[a], cell[b], vol * if same { 2.0 } else { 1.0 } / 6.0));
                        kt.push((cell[a], cell[b], if same { 1.0 } else { -1.0 } / vol));
                    }
                }
            }
            _ => {
                let p: [&[f64]; 3] = [
                    mesh.vertex(cell[0]),
                    mesh.vertex(cell[1]),
                    mesh.vertex(cell[2]),
                ];
                let det = 2.0 * signed;
                let grads = [
                    [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
                    [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
                    [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
                ];
                for a in 0..3 {
                    for b in 0..3 {
                        let m = vol * if a == b { 2.0 } else { 1.0 } / 12.0;
                        let k = vol * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                        mt.push((cell[a], cell[b], m));
                        kt.push((cell[a], cell[b], k));
                    }
                }
            }
        }
    }
    let mass = CsrMatrix::from_triplets(n, mt);
    let stiffness = CsrMatrix::from_triplets(n, kt);
    let ones_mass = mass.mul(&alloc::vec![1.0; n]);
    let measure = ones_mass.iter().sum();
    let mass_factor = BandCholesky::factor(&mass).ok();
    let neumann = NeumannSolver::new(&stiffness, &ones_mass);
    let rule = CellRule::degree4(dim);
    Ok(OperatorSet {
        mesh,
        mass,
        stiffness,
        mass_factor,
        neumann,
        ones_mass,
        measure,
        cell_measures,
        rule,
    })
}

impl OperatorSet {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Number of nodal degrees of freedom (`N_h + 1`).
    pub fn dofs(&self) -> usize {
        self.mass.n()
    }

    /// `|D|` as seen by the mesh.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// `M 1`, i.e. the integrals of the hat functions.
    pub fn hat_integrals(&self) -> &[f64] {
        &self.ones_mass
    }

    pub fn cell_measures(&self) -> &[f64] {
        &self.cell_measures
    }

    /// Degree-4 rule used for assembly and nonlinear terms.
    pub fn rule(&self) -> &CellRule {
        &self.rule
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.dofs(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Overwrite `b` with `M^{-1} b`.
    pub fn mass_solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        self.check(b)?;
        if let Some(f) = &self.mass_factor {
            f.solve_in_place(b);
            return Ok(());
        }
        let diag = self.mass.diagonal();
        let rhs = b.to_vec();
        let mut x = alloc::vec![0.0; b.len()];
        conjugate_gradient(
            |v, out| self.mass.matvec(v, out),
            |r, z| {
                z.iter_mut()
                    .zip(r)
                    .zip(&diag)
                    .for_each(|((z, r), d)| *z = r / d)
            },
            |_| {},
            &rhs,
            &mut x,
            ITERATIVE_RTOL,
            10 * b.len() + 100,
        )?;
        b.copy_from_slice(&x);
        Ok(())
    }

    /// Solve `K c = g` with `c` constrained to have spatial mean `mean`.
    pub fn neumann_solve(&self, g: &[f64], mean: f64) -> Result<FemFunction> {
        self.check(g)?;
        let values = self
            .neumann
            .solve(&self.stiffness, g, mean * self.measure)?;
        Ok(FemFunction { values })
    }

    /// Spatial mean `|D|^{-1} int v`.
    pub fn mean(&self, v: &FemFunction) -> f64 {
        v.values
            .iter()
            .zip(&self.ones_mass)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.measure
    }

    /// `M`-inner product, i.e. the `L2` inner product of two P1 functions.
    pub fn inner(&self, a: &FemFunction, b: &FemFunction) -> f64 {
        self.mass.bilinear(&a.values, &b.values)
    }

    pub fn l2_norm(&self, v: &FemFunction) -> f64 {
        self.mass.bilinear(&v.values, &v.values).max(0.0).sqrt()
    }

    /// `|v|_1 = ||grad v||`.
    pub fn h1_seminorm(&self, v: &FemFunction) -> f64 {
        self.stiffness
            .bilinear(&v.values, &v.values)
            .max(0.0)
            .sqrt()
    }

    /// `A_h v = M^{-1} K v`.
    pub fn apply_ah(&self, v: &FemFunction) -> Result<FemFunction> {
        self.check(&v.values)?;
        let mut values = self.stiffness.mul(&v.values);
        self.mass_solve_in_place(&mut values)?;
        Ok(FemFunction { values })
    }

    /// `|v|_{-1,h}` through `K y = M v` on the zero-mean subspace.
    pub fn negative_norm(&self, v: &FemFunction) -> Result<f64> {
        self.check(&v.values)?;
        let mean = self.mean(v);
        let centered: Vec<f64> = v.values.iter().map(|x| x - mean).collect();
        let rhs = self.mass.mul(&centered);
        let y = self.neumann_solve(&rhs, 0.0)?;
        Ok(rhs
            .iter()
            .zip(&y.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt())
    }

    /// Same quantity as [`OperatorSet::negative_norm`] computed with projected
    /// conjugate gradients; the fallback when no direct factorization is used.
    pub fn negative_norm_cg(&self, v: &FemFunction) -> Result<f64> {
        self.check(&v.values)?;
        let mean = self.mean(v);
        let centered: Vec<f64> = v.values.iter().map(|x| x - mean).collect();
        let rhs = self.mass.mul(&centered);
        let y = self.neumann.solve_iterative(&self.stiffness, &rhs, 0.0)?;
        Ok(rhs
            .iter()
            .zip(&y)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt())
    }

    /// Value of a P1 function at a point of the domain.
    pub fn eval(&self, v: &FemFunction, x: &[f64]) -> Option<f64> {
        let (c, bary) = self.mesh.locate(x)?;
        Some(
            self.mesh
                .cell(c)
                .iter()
                .zip(&bary)
                .map(|(&i, l)| l * v.values[i])
                .sum(),
        )
    }

    /// Visit every quadrature point as `(cell, barycentric, physical, weight)`
    /// where `weight` already includes the cell measure.
    pub fn for_each_quadrature_point(
        &self,
        rule: &CellRule,
        mut visit: impl FnMut(usize, &[f64; 3], &[f64], f64),
    ) {
        let mut x = [0.0; 2];
        let dim = self.mesh.dim();
        for c in 0..self.mesh.num_cells() {
            let vol = self.cell_measures[c];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                self.mesh.map_point(c, p, &mut x);
                visit(c, p, &x[..dim], vol * w);
            }
        }
    }

    /// Load vector `b_i = int f phi_i`.
    pub fn load_vector(&self, f: impl Fn(&[f64]) -> f64, rule: &CellRule) -> Vec<f64> {
        let mut b = alloc::vec![0.0; self.dofs()];
        self.for_each_quadrature_point(rule, |c, bary, x, w| {
            let fx = f(x) * w;
            for (&i, l) in self.mesh.cell(c).iter().zip(bary) {
                b[i] += fx * l;
            }
        });
        b
    }

    /// `P_h f`: the `L2` projection of a pointwise-evaluable field, integrated
    /// with `rule`.
    pub fn project_l2(&self, f: impl Fn(&[f64]) -> f64, rule: &CellRule) -> Result<FemFunction> {
        let mut values = self.load_vector(f, rule);
        self.mass_solve_in_place(&mut values)?;
        Ok(FemFunction { values })
    }

    /// `P_h v` for a spectral field, integrating the exact cosines.
    pub fn project_spectral(
        &self,
        basis: &EigenBasis,
        v: &SpectralField,
        rule: &CellRule,
    ) -> Result<FemFunction> {
        if v.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: v.len(),
            });
        }
        self.project_l2(|x| basis.evaluate(v, x), rule)
    }

    /// Ritz projection `R_h v = R_h P v + (I - P) v`.
    ///
    /// Uses `int grad v . grad phi_i = <A v, phi_i>`, valid for Neumann
    /// eigenfunction expansions, so only the load of `A v` is needed.
    pub fn ritz_project(
        &self,
        basis: &EigenBasis,
        v: &SpectralField,
        rule: &CellRule,
    ) -> Result<FemFunction> {
        let av = basis.apply_power(v, 1.0)?;
        let g = self.load_vector(|x| basis.evaluate(&av, x), rule);
        self.neumann_solve(&g, basis.mean(v))
    }

    /// Ritz projection from a precomputed stiffness load `g_i = <grad v, grad phi_i>`.
    pub fn ritz_project_load(&self, g: &[f64], mean: f64) -> Result<FemFunction> {
        self.neumann_solve(g, mean)
    }

    /// `|P_h v|_1 / |v|_1` for a zero-mean spectral field.
    pub fn h1_bound_ratio(
        &self,
        basis: &EigenBasis,
        v: &SpectralField,
        rule: &CellRule,
    ) -> Result<f64> {
        let mean = basis.mean(v);
        if mean.abs() > 1e-12 {
            return Err(Error::NonzeroMean { mean });
        }
        let exact = basis.norm_alpha(v, 1.0, NormKind::Dotted)?;
        if exact == 0.0 {
            return Err(Error::ZeroInput);
        }
        Ok(self.h1_seminorm(&self.project_spectral(basis, v, rule)?) / exact)
    }

    /// `||v_h - f||` with `f` evaluated pointwise.
    pub fn l2_distance_to(
        &self,
        v: &FemFunction,
        f: impl Fn(&[f64]) -> f64,
        rule: &CellRule,
    ) -> f64 {
        let mut acc = 0.0;
        self.for_each_quadrature_point(rule, |c, bary, x, w| {
            let vh: f64 = self
                .mesh
                .cell(c)
                .iter()
                .zip(bary)
                .map(|(&i, l)| l * v.values[i])
                .sum();
            let d = vh - f(x);
            acc += w * d * d;
        });
        acc.sqrt()
    }
}

/// `||a - b||` for P1 functions on two meshes of the same domain, integrated on
/// the mesh of `a` (which should be the finer one). Exact for nested meshes.
pub fn l2_distance_across(
    ops_a: &OperatorSet,
    a: &FemFunction,
    ops_b: &OperatorSet,
    b: &FemFunction,
    rule: &CellRule,
) -> f64 {
    ops_a.l2_distance_to(a, |x| ops_b.eval(b, x).unwrap_or(f64::NAN), rule)
}
