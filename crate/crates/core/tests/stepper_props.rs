use chc_core::eigen::DiscreteSpectrum;
use chc_core::fem::{assemble, FemFunction, OperatorSet};
use chc_core::mesh::build_interval_mesh;
use chc_core::noise::{projection_rule, sample_increments, NoiseProjector, NoiseSpec};
use chc_core::potential::Potential;
use chc_core::spectral::{build_basis, DomainSpec, SpectralField};
use chc_core::stepper::{
    chemical_potential, lyapunov_j, run_trajectory, NoiseLevel, Stepper, StepperConfig, Storage,
};
use proptest::prelude::*;

fn interval(n: usize) -> OperatorSet {
    assemble(build_interval_mesh(1.0, n).unwrap()).unwrap()
}

/// `f = 0`, 32 steps on 32 cells: every Newton step equals
/// `(I + k A_h^2)^{-1}(X^{j-1} + w)` applied in the discrete eigenbasis.
#[test]
fn linear_stepper_matches_the_diagonal_resolvent() {
    let ops = interval(32);
    let spectrum = DiscreteSpectrum::compute(&ops).unwrap();
    let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 17).unwrap();
    let potential = Potential::none();
    let steps = 32;
    let k = 0.05 / steps as f64;
    let stepper = Stepper::new(&ops, &potential, StepperConfig::new(k).unwrap()).unwrap();
    let x0 = SpectralField {
        coeffs: (0..17)
            .map(|j| if j == 0 { 0.3 } else { 1.0 / j as f64 })
            .collect(),
    };
    let x0 = ops
        .project_spectral(&basis, &x0, &projection_rule(&ops, &basis))
        .unwrap();
    let spec = NoiseSpec::new(2.0, 1.0, 16, 4).unwrap();
    let projector = NoiseProjector::new(&ops, &basis, 17).unwrap();
    for noisy in [false, true] {
        let inc = sample_increments(&spec, &basis, 0.05, steps, &[1], 0).unwrap();
        let mut oracle = x0.clone();
        let mut worst: f64 = 0.0;
        let noise = noisy.then_some(NoiseLevel {
            increments: &inc,
            factor: 1,
            projector: &projector,
        });
        let traj =
            run_trajectory(&stepper, x0.clone(), steps, noise, Storage::Full, |_, _| {}).unwrap();
        for j in 0..steps {
            let mut rhs = oracle.clone();
            if noisy {
                rhs.axpy(1.0, &projector.project(&inc.field_increment(j, 1)).unwrap());
            }
            oracle = spectrum
                .apply_fn(&ops, &rhs, |mu| 1.0 / (1.0 + k * mu * mu))
                .unwrap();
            worst = worst.max(traj.snapshots[j + 1].x.max_abs_diff(&oracle));
        }
        assert!(
            worst <= 1e-9,
            "noisy = {noisy}: max nodal deviation {worst:e}"
        );
    }
}

#[test]
fn stationary_constant_state() {
    let ops = interval(16);
    let p = Potential::double_well();
    let stepper = Stepper::new(&ops, &p, StepperConfig::new(1e-3).unwrap()).unwrap();
    let x0 = FemFunction::constant(17, 1.0);
    let s0 = stepper.initial_state(x0.clone()).unwrap();
    let (s1, d) = stepper.step(&s0, None).unwrap();
    assert_eq!(s1.x, x0);
    assert_eq!(d.newton_iterations, 1);
    assert!(d.energy_residual.abs() < 1e-14);
    assert_eq!(lyapunov_j(&x0, &ops, &p), 0.0);
    assert!((lyapunov_j(&FemFunction::zeros(17), &ops, &p) - 0.25).abs() < 1e-15);
}

#[test]
fn lyapunov_functional_against_quadrature() {
    let n = 64;
    let ops = interval(n);
    let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 2).unwrap();
    let p = Potential::double_well();
    let x = ops
        .project_spectral(
            &basis,
            &SpectralField::mode(2, 1, 0.1).unwrap(),
            &projection_rule(&ops, &basis),
        )
        .unwrap();
    // the same P1 function integrated by a fine midpoint rule
    let h = 1.0 / n as f64;
    let per_cell = 4000;
    let mut oracle = 0.0;
    for c in 0..n {
        let (a, b) = (x.values[c], x.values[c + 1]);
        oracle += 0.5 * (b - a) * (b - a) / h;
        for i in 0..per_cell {
            let t = (i as f64 + 0.5) / per_cell as f64;
            oracle += p.big_f(a + t * (b - a)) * h / per_cell as f64;
        }
    }
    let j = lyapunov_j(&x, &ops, &p);
    assert!((j - oracle).abs() < 1e-6, "{j} vs {oracle}");
    // and the continuous value 1/2 (0.1)^2 pi^2 + int F(0.1 sqrt 2 cos pi x) up to O(h^2)
    let m = 100_000;
    let f_int: f64 = (0..m)
        .map(|i| {
            p.big_f(0.1 * 2f64.sqrt() * (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos())
        })
        .sum::<f64>()
        / m as f64;
    let exact = 0.5 * 0.01 * std::f64::consts::PI.powi(2) + f_int;
    assert!((j - exact).abs() < 10.0 * h * h * exact, "{j} vs {exact}");
}

fn random_field(n: usize, coeffs: &[f64]) -> FemFunction {
    let values = (0..=n)
        .map(|i| {
            let x = i as f64 / n as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * (std::f64::consts::PI * (j + 1) as f64 * x).cos())
                .sum()
        })
        .collect();
    FemFunction { values }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Mass conservation, the energy inequality and fast Newton convergence
    /// along noisy double-well runs.
    #[test]
    fn noisy_runs_keep_their_invariants(
        coeffs in prop::collection::vec(-0.3..0.3f64, 1..5),
        mean in -0.5..0.5f64,
        seed in any::<u64>(),
        n in prop::sample::select(vec![16usize, 32, 64]),
    ) {
        let ops = interval(n);
        let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 17).unwrap();
        let p = Potential::double_well();
        let steps = 40;
        let k = 0.02 / steps as f64;
        let stepper = Stepper::new(&ops, &p, StepperConfig::new(k).unwrap()).unwrap();
        let mut x0 = random_field(n, &coeffs);
        x0.values.iter_mut().for_each(|v| *v += mean);
        let spec = NoiseSpec::new(2.0, 1.0, 16, seed).unwrap();
        let projector = NoiseProjector::new(&ops, &basis, 17).unwrap();
        let inc = sample_increments(&spec, &basis, 0.02, steps, &[1], 0).unwrap();
        let noise = NoiseLevel { increments: &inc, factor: 1, projector: &projector };
        let t = run_trajectory(&stepper, x0, steps, Some(noise), Storage::MaximaOnly, |_, _| {}).unwrap();
        prop_assert!(t.maxima.mass_drift <= 1e-10);
        prop_assert!(t.maxima.energy_residual <= 1e-8);
        prop_assert!(t.maxima.newton_iterations <= 8);
        // Y is the chemical potential of X
        let y = chemical_potential(&t.last.x, &ops, &p).unwrap();
        prop_assert!(y.max_abs_diff(&t.last.y) <= 1e-8);
    }

    #[test]
    fn deterministic_runs_decrease_energy(
        coeffs in prop::collection::vec(-0.5..0.5f64, 1..5),
        n in prop::sample::select(vec![16usize, 32]),
    ) {
        let ops = interval(n);
        let p = Potential::double_well();
        let stepper = Stepper::new(&ops, &p, StepperConfig::new(1e-4).unwrap()).unwrap();
        let t = run_trajectory(&stepper, random_field(n, &coeffs), 50, None, Storage::MaximaOnly, |_, _| {})
            .unwrap();
        prop_assert!(t.maxima.energy_increase <= 1e-8);
        prop_assert!(t.maxima.energy_residual <= 1e-8);
    }
}
