//! Fully implicit backward Euler for the Cahn–Hilliard–Cook equation in the
//! mixed form
//!
//! ```text
//! M X + k K Y = M X_prev + M w,      K X + b(X) = M Y,
//! ```
//!
//! with `b_i(X) = int f(X) phi_i`, solved by Newton's method. Unknowns are
//! interleaved as `(X_0, Y_0, X_1, Y_1, ...)` so the Jacobian keeps the band
//! structure of the mesh.

use alloc::boxed::Box;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::fem::{FemFunction, OperatorSet};
use crate::noise::{NoiseProjector, WienerIncrements};
use crate::potential::Potential;
use crate::sparse::BandMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub k: f64,
    pub newton_rtol: f64,
    pub newton_atol: f64,
    pub max_newton_iters: usize,
}

impl StepperConfig {
    pub fn new(k: f64) -> Result<Self> {
        let cfg = StepperConfig {
            k,
            newton_rtol: 1e-10,
            newton_atol: 1e-12,
            max_newton_iters: 50,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "time step must be positive, got {}",
                self.k
            )));
        }
        if !(self.newton_rtol > 0.0 && self.newton_atol > 0.0) {
            return Err(Error::InvalidArgument(
                "Newton tolerances must be positive".into(),
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidArgument(
                "at least one Newton iteration is required".into(),
            ));
        }
        Ok(())
    }
}

/// `(X_h^j, Y_h^j)` at step `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: FemFunction,
    pub y: FemFunction,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iterations: usize,
    pub residual: f64,
    pub mass: f64,
    pub energy: f64,
    /// `|Y|_1`.
    pub y_h1: f64,
    /// `||Delta X||`.
    pub dx_l2: f64,
    /// `|Delta X|_1`.
    pub dx_h1: f64,
    /// Left side of the discrete energy inequality; nonpositive up to the
    /// Newton tolerance.
    pub energy_residual: f64,
    /// The same with the opposite sign on the `c_1^2 ||Delta X||^2` term.
    pub energy_residual_flipped: f64,
}

/// Newton solver for one mesh, potential and step size.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    ops: &'a OperatorSet,
    potential: &'a Potential,
    cfg: StepperConfig,
    // [[M, kK], [K, -M]] interleaved; B'(X) is added per iteration
    linear_part: BandMatrix,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a OperatorSet, potential: &'a Potential, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let n = ops.dofs();
        let band = 2 * ops.stiffness().bandwidth().max(ops.mass().bandwidth()) + 1;
        let mut linear_part = BandMatrix::zeros(2 * n, band, band);
        for i in 0..n {
            for (l, m) in ops.mass().row(i) {
                linear_part.add(2 * i, 2 * l, m);
                linear_part.add(2 * i + 1, 2 * l + 1, -m);
            }
            for (l, kv) in ops.stiffness().row(i) {
                linear_part.add(2 * i, 2 * l + 1, cfg.k * kv);
                linear_part.add(2 * i + 1, 2 * l, kv);
            }
        }
        Ok(Stepper {
            ops,
            potential,
            cfg,
            linear_part,
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn ops(&self) -> &OperatorSet {
        self.ops
    }

    pub fn potential(&self) -> &Potential {
        self.potential
    }

    /// Initial state `(X0, Y(X0))` at step 0.
    pub fn initial_state(&self, x0: FemFunction) -> Result<State> {
        let y = chemical_potential(&x0, self.ops, self.potential)?;
        Ok(State {
            x: x0,
            y,
            step: 0,
            time: 0.0,
        })
    }

    /// One step from `prev` with projected increment `w = P_h Delta W`
    /// (`None` for the deterministic scheme).
    pub fn step(&self, prev: &State, w: Option<&FemFunction>) -> Result<(State, StepDiagnostics)> {
        let ops = self.ops;
        let n = ops.dofs();
        if prev.x.len() != n || w.is_some_and(|w| w.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: prev.x.len(),
            });
        }
        let k = self.cfg.k;
        let mut rhs = prev.x.values.clone();
        if let Some(w) = w {
            rhs.iter_mut().zip(&w.values).for_each(|(r, w)| *r += w);
        }
        let rhs = ops.mass().mul(&rhs);
        let tol = self.cfg.newton_atol + self.cfg.newton_rtol * norm(&rhs);

        let mut x = prev.x.clone();
        let mut y = prev.y.clone();
        let mut history = Vec::new();
        let mut z = alloc::vec![0.0; 2 * n];
        let mut iterations = 0;
        loop {
            let mx = ops.mass().mul(&x.values);
            let ky = ops.stiffness().mul(&y.values);
            let kx = ops.stiffness().mul(&x.values);
            let my = ops.mass().mul(&y.values);
            let b = self.potential.load(ops, &x);
            for i in 0..n {
                z[2 * i] = mx[i] + k * ky[i] - rhs[i];
                z[2 * i + 1] = kx[i] + b[i] - my[i];
            }
            let r = norm(&z);
            history.push(r);
            // at least one correction, so stationary states are confirmed by a solve
            if iterations > 0 && r <= tol {
                break;
            }
            if iterations == self.cfg.max_newton_iters || !r.is_finite() {
                return Err(Error::NewtonDiverged {
                    iterations,
                    residual: r,
                    history,
                });
            }
            let mut jac = self.linear_part.clone();
            self.potential
                .for_each_jacobian_entry(ops, &x, |i, l, v| jac.add(2 * i + 1, 2 * l, v));
            jac.factor()?;
            jac.solve_in_place(&mut z);
            for i in 0..n {
                x.values[i] -= z[2 * i];
                y.values[i] -= z[2 * i + 1];
            }
            iterations += 1;
        }
        let residual = *history.last().expect("at least one residual");
        let next = State {
            x,
            y,
            step: prev.step + 1,
            time: prev.time + k,
        };
        let diag = self.diagnostics(prev, &next, w, iterations, residual);
        Ok((next, diag))
    }

    fn diagnostics(
        &self,
        prev: &State,
        next: &State,
        w: Option<&FemFunction>,
        newton_iterations: usize,
        residual: f64,
    ) -> StepDiagnostics {
        let ops = self.ops;
        let dx = next.x.sub(&prev.x);
        let dx_l2 = ops.l2_norm(&dx);
        let dx_h1 = ops.h1_seminorm(&dx);
        let energy = lyapunov_j(&next.x, ops, self.potential);
        let y_h1 = ops.h1_seminorm(&next.y);
        let (energy_residual, energy_residual_flipped) =
            energy_residuals(prev, next, w, self.cfg.k, ops, self.potential);
        StepDiagnostics {
            newton_iterations,
            residual,
            mass: ops.mean(&next.x),
            energy,
            y_h1,
            dx_l2,
            dx_h1,
            energy_residual,
            energy_residual_flipped,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Y = A_h X + P_h f(X)`, i.e. the solution of `M Y = K X + b(X)`.
pub fn chemical_potential(
    x: &FemFunction,
    ops: &OperatorSet,
    p: &Potential,
) -> Result<FemFunction> {
    if x.len() != ops.dofs() {
        return Err(Error::DimensionMismatch {
            expected: ops.dofs(),
            found: x.len(),
        });
    }
    let mut values = ops.stiffness().mul(&x.values);
    values
        .iter_mut()
        .zip(p.load(ops, x))
        .for_each(|(v, b)| *v += b);
    ops.mass_solve_in_place(&mut values)?;
    Ok(FemFunction { values })
}

/// `J(X) = |X|_1^2 / 2 + int F(X)`.
pub fn lyapunov_j(x: &FemFunction, ops: &OperatorSet, p: &Potential) -> f64 {
    0.5 * ops.stiffness().bilinear(&x.values, &x.values) + p.functional(ops, x)
}

/// `J(X^j) - J(X^{j-1}) + |dX|_1^2 / 2 + k |Y^j|_1^2 - <Y^j, w> - c_1^2 ||dX||^2 / 2`.
pub fn energy_residual(
    prev: &State,
    next: &State,
    w: Option<&FemFunction>,
    k: f64,
    ops: &OperatorSet,
    p: &Potential,
) -> f64 {
    energy_residuals(prev, next, w, k, ops, p).0
}

/// The residual above together with its variant carrying `+ c_1^2 ||dX||^2 / 2`.
pub fn energy_residuals(
    prev: &State,
    next: &State,
    w: Option<&FemFunction>,
    k: f64,
    ops: &OperatorSet,
    p: &Potential,
) -> (f64, f64) {
    let dx = next.x.sub(&prev.x);
    let dx_h1_sq = ops.stiffness().bilinear(&dx.values, &dx.values);
    let dx_l2_sq = ops.mass().bilinear(&dx.values, &dx.values);
    let y_h1_sq = ops.stiffness().bilinear(&next.y.values, &next.y.values);
    let forcing = w.map_or(0.0, |w| ops.mass().bilinear(&next.y.values, &w.values));
    let base =
        lyapunov_j(&next.x, ops, p) - lyapunov_j(&prev.x, ops, p) + 0.5 * dx_h1_sq + k * y_h1_sq
            - forcing;
    let c = 0.5 * p.c1_squared() * dx_l2_sq;
    (base - c, base + c)
}

/// One time level of a coupled noise hierarchy projected onto one mesh.
#[derive(Debug, Clone, Copy)]
pub struct NoiseLevel<'a> {
    pub increments: &'a WienerIncrements,
    pub factor: usize,
    pub projector: &'a NoiseProjector,
}

impl NoiseLevel<'_> {
    pub fn steps(&self) -> Result<usize> {
        self.increments.steps(self.factor)
    }

    pub fn k(&self) -> f64 {
        self.increments.k_fine() * self.factor as f64
    }

    /// `P_h Delta W` over step `step` (zero-based).
    pub fn increment(&self, step: usize) -> Result<FemFunction> {
        self.projector
            .project(&self.increments.field_increment(step, self.factor))
    }
}

/// Which states a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Full,
    /// The initial state, every `stride`-th state and the final state.
    Strided(usize),
    MaximaOnly,
}

impl Storage {
    /// The default: about a hundred snapshots.
    pub fn default_for(steps: usize) -> Self {
        Storage::Strided(steps.div_ceil(100).max(1))
    }
}

/// Running suprema along a trajectory, the initial state included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maxima {
    pub l2: f64,
    pub negative: f64,
    pub energy: f64,
    pub mass_drift: f64,
    /// `sum_j k |Y^j|_1^2`.
    pub dissipation: f64,
    pub energy_residual: f64,
    pub energy_residual_flipped: f64,
    pub energy_increase: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub maxima: Maxima,
    pub last: State,
}

/// Run `steps` backward Euler steps from `x0`. With `noise` the step count
/// and step size must match the noise level. `observe` sees every state,
/// the initial one included (with `None` diagnostics).
pub fn run_trajectory(
    stepper: &Stepper<'_>,
    x0: FemFunction,
    steps: usize,
    noise: Option<NoiseLevel<'_>>,
    storage: Storage,
    mut observe: impl FnMut(&State, Option<&StepDiagnostics>),
) -> Result<Trajectory> {
    let ops = stepper.ops();
    if let Some(level) = &noise {
        let level_steps = level.steps()?;
        let k = stepper.config().k;
        if level_steps != steps || (level.k() - k).abs() > 1e-12 * k {
            return Err(Error::InvalidArgument(alloc::format!(
                "noise level has {level_steps} steps of {}, run asks for {steps} steps of {k}",
                level.k()
            )));
        }
    }
    let mut state = stepper.initial_state(x0)?;
    let mass0 = ops.mean(&state.x);
    let mut maxima = Maxima {
        l2: ops.l2_norm(&state.x),
        negative: ops.negative_norm(&state.x)?,
        energy: lyapunov_j(&state.x, ops, stepper.potential()),
        mass_drift: 0.0,
        dissipation: 0.0,
        energy_residual: f64::NEG_INFINITY,
        energy_residual_flipped: f64::NEG_INFINITY,
        energy_increase: f64::NEG_INFINITY,
        newton_iterations: 0,
    };
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::new();
    let keep = |s: &State| match storage {
        Storage::Full => true,
        Storage::Strided(stride) => s.step % stride.max(1) == 0 || s.step == steps,
        Storage::MaximaOnly => false,
    };
    if keep(&state) {
        snapshots.push(state.clone());
    }
    observe(&state, None);
    let mut prev_energy = maxima.energy;
    for j in 0..steps {
        let w = match &noise {
            Some(level) => Some(level.increment(j)?),
            None => None,
        };
        let (next, diag) = stepper
            .step(&state, w.as_ref())
            .map_err(|e| Error::StepFailed {
                step: j + 1,
                source: Box::new(e),
            })?;
        maxima.l2 = maxima.l2.max(ops.l2_norm(&next.x));
        maxima.negative = maxima.negative.max(ops.negative_norm(&next.x)?);
        maxima.energy = maxima.energy.max(diag.energy);
        maxima.mass_drift = maxima.mass_drift.max((diag.mass - mass0).abs());
        maxima.dissipation += stepper.config().k * diag.y_h1 * diag.y_h1;
        maxima.energy_residual = maxima.energy_residual.max(diag.energy_residual);
        maxima.energy_residual_flipped = maxima
            .energy_residual_flipped
            .max(diag.energy_residual_flipped);
        maxima.energy_increase = maxima.energy_increase.max(diag.energy - prev_energy);
        maxima.newton_iterations = maxima.newton_iterations.max(diag.newton_iterations);
        prev_energy = diag.energy;
        observe(&next, Some(&diag));
        if keep(&next) {
            snapshots.push(next.clone());
        }
        if storage != Storage::MaximaOnly {
            diagnostics.push(diag);
        }
        state = next;
    }
    Ok(Trajectory {
        snapshots,
        diagnostics,
        maxima,
        last: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::DiscreteSpectrum;
    use crate::fem::assemble;
    use crate::mesh::build_interval_mesh;

    fn interval(n: usize) -> OperatorSet {
        assemble(build_interval_mesh(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn chemical_potential_of_constants() {
        let ops = interval(8);
        let p = Potential::double_well();
        for (c, want) in [(1.0, 0.0), (0.0, 0.0), (2.0, 6.0)] {
            let y = chemical_potential(&FemFunction::constant(9, c), &ops, &p).unwrap();
            assert!(
                y.values.iter().all(|v| (v - want).abs() < 1e-10),
                "{c}: {:?}",
                y.values
            );
        }
    }

    #[test]
    fn stationary_state_is_a_fixed_point() {
        let ops = interval(8);
        let p = Potential::double_well();
        let s = Stepper::new(&ops, &p, StepperConfig::new(1e-3).unwrap()).unwrap();
        let prev = s.initial_state(FemFunction::constant(9, 1.0)).unwrap();
        let (next, diag) = s.step(&prev, None).unwrap();
        assert_eq!(next.x, prev.x);
        assert_eq!(diag.newton_iterations, 1);
        assert_eq!(diag.energy_residual, 0.0);
    }

    #[test]
    fn linear_step_matches_the_resolvent() {
        let ops = interval(16);
        let p = Potential::none();
        let k = 1e-3;
        let s = Stepper::new(&ops, &p, StepperConfig::new(k).unwrap()).unwrap();
        let spec = DiscreteSpectrum::compute(&ops).unwrap();
        let x0 = FemFunction {
            values: (0..17).map(|i| (i as f64 * 0.7).sin()).collect(),
        };
        let w = FemFunction {
            values: (0..17).map(|i| 0.01 * (i as f64 * 1.3).cos()).collect(),
        };
        let prev = s.initial_state(x0.clone()).unwrap();
        let (next, diag) = s.step(&prev, Some(&w)).unwrap();
        let mut sum = x0.clone();
        sum.axpy(1.0, &w);
        let want = spec
            .apply_fn(&ops, &sum, |l| 1.0 / (1.0 + k * l * l))
            .unwrap();
        assert!(next.x.max_abs_diff(&want) < 1e-9);
        assert!((ops.mean(&next.x) - ops.mean(&sum)).abs() < 1e-12);
        assert!(diag.energy_residual <= 1e-8);
    }

    #[test]
    fn zero_steps_return_the_initial_state() {
        let ops = interval(8);
        let p = Potential::double_well();
        let s = Stepper::new(&ops, &p, StepperConfig::new(1e-3).unwrap()).unwrap();
        let x0 = FemFunction {
            values: (0..9).map(|i| 0.1 * i as f64).collect(),
        };
        let t = run_trajectory(&s, x0.clone(), 0, None, Storage::Full, |_, _| {}).unwrap();
        assert_eq!(t.snapshots.len(), 1);
        assert_eq!(t.last.x, x0);
        assert!(t.diagnostics.is_empty());
    }

    #[test]
    fn deterministic_energy_decreases() {
        let ops = interval(32);
        let p = Potential::double_well();
        let s = Stepper::new(&ops, &p, StepperConfig::new(1e-4).unwrap()).unwrap();
        let x0 = FemFunction {
            values: (0..33)
                .map(|i| 0.5 * (core::f64::consts::PI * i as f64 / 32.0).cos())
                .collect(),
        };
        let t = run_trajectory(&s, x0, 50, None, Storage::MaximaOnly, |_, _| {}).unwrap();
        assert!(t.maxima.energy_increase <= 1e-8);
        assert!(t.maxima.energy_residual <= 1e-8);
        assert!(t.maxima.mass_drift <= 1e-12);
        assert!(t.snapshots.is_empty());
    }
}
