use std::f64::consts::PI;

use chc_core::eigen::DiscreteSpectrum;
use chc_core::fem::{assemble, FemFunction, OperatorSet};
use chc_core::mesh::{build_interval_mesh, build_rectangle_mesh};
use chc_core::noise::projection_rule;
use chc_core::rates::fit_loglog;
use chc_core::spectral::{build_basis, DomainSpec, EigenBasis, SpectralField};
use chc_core::Error;
use proptest::prelude::*;

fn interval(n: usize) -> OperatorSet {
    assemble(build_interval_mesh(1.0, n).unwrap()).unwrap()
}

fn unit_basis(len: usize) -> EigenBasis {
    build_basis(DomainSpec::interval(1.0).unwrap(), len).unwrap()
}

#[test]
fn h1_bound_ratio_examples() {
    let basis = unit_basis(11);
    let phi1 = SpectralField::mode(11, 1, 1.0).unwrap();
    // |P_h phi_1|_1 / |phi_1|_1 from an independent dense assembly with
    // adaptive quadrature; it exceeds 1 by about 0.4 h^2
    let oracle = [
        (4, 1.0255461123020708),
        (8, 1.006420063683507),
        (16, 1.0016061023565461),
        (64, 1.00010039779481),
        (128, 1.0000250996388698),
    ];
    for (n, want) in oracle {
        let ops = interval(n);
        let r = ops
            .h1_bound_ratio(&basis, &phi1, &projection_rule(&ops, &basis))
            .unwrap();
        assert!((r - want).abs() < 1e-9, "n = {n}: {r} vs {want}");
        let h = 1.0 / n as f64;
        assert!(r > 1.0 && r - 1.0 < 0.5 * h * h);
    }
    let ops = interval(64);
    let rule = projection_rule(&ops, &basis);
    let sum = SpectralField {
        coeffs: (0..11)
            .map(|j| if j == 0 { 0.0 } else { 1.0 / j as f64 })
            .collect(),
    };
    assert!(ops.h1_bound_ratio(&basis, &sum, &rule).unwrap() <= 2.0);
    assert!(matches!(
        ops.h1_bound_ratio(&basis, &SpectralField::zeros(11), &rule),
        Err(Error::ZeroInput)
    ));
    assert!(matches!(
        ops.h1_bound_ratio(&basis, &SpectralField::mode(11, 0, 1.0).unwrap(), &rule),
        Err(Error::NonzeroMean { .. })
    ));
}

#[test]
fn seminorm_of_discrete_eigenvectors() {
    let ops = interval(16);
    let spectrum = DiscreteSpectrum::compute(&ops).unwrap();
    let v = FemFunction {
        values: spectrum.vector(3).to_vec(),
    };
    let h1 = ops.h1_seminorm(&v);
    assert!((h1 * h1 - spectrum.eigenvalue(3)).abs() < 1e-9);
}

#[test]
fn projection_and_ritz_rates() {
    let basis = unit_basis(2);
    let phi1 = SpectralField::mode(2, 1, 1.0).unwrap();
    let levels = [8usize, 16, 32, 64];
    let mut hs = Vec::new();
    let (mut el2, mut eritz) = (Vec::new(), Vec::new());
    for &n in &levels {
        let ops = interval(n);
        let rule = projection_rule(&ops, &basis);
        let exact = |x: &[f64]| basis.evaluate(&phi1, x);
        hs.push(1.0 / n as f64);
        el2.push(ops.l2_distance_to(
            &ops.project_spectral(&basis, &phi1, &rule).unwrap(),
            exact,
            &rule,
        ));
        eritz.push(ops.l2_distance_to(
            &ops.ritz_project(&basis, &phi1, &rule).unwrap(),
            exact,
            &rule,
        ));
    }
    let p = fit_loglog(&hs, &el2).unwrap();
    let r = fit_loglog(&hs, &eritz).unwrap();
    assert!(
        (1.9..=2.1).contains(&p.slope),
        "L2 projection slope {}",
        p.slope
    );
    assert!((1.9..=2.1).contains(&r.slope), "Ritz slope {}", r.slope);
}

#[test]
fn discrete_spectrum_oracles() {
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let ops = interval(n);
        let s = DiscreteSpectrum::compute(&ops).unwrap();
        assert_eq!(
            s.eigenvalues().iter().filter(|&&l| l.abs() < 1e-8).count(),
            1
        );
        // min-max: discrete eigenvalues of resolved modes lie above the exact ones
        for j in 1..=n / 4 {
            assert!(s.eigenvalue(j) >= (j as f64 * PI).powi(2) * (1.0 - 1e-12));
        }
        // A_h phi_h = lambda_h phi_h
        let v = FemFunction {
            values: s.vector(2).to_vec(),
        };
        let av = ops.apply_ah(&v).unwrap();
        for (a, b) in av.values.iter().zip(&v.values) {
            assert!((a - s.eigenvalue(2) * b).abs() < 1e-9 * s.eigenvalue(2));
        }
        hs.push(1.0 / n as f64);
        errs.push(s.eigenvalue(1) - PI * PI);
    }
    let fit = fit_loglog(&hs, &errs).unwrap();
    assert!((1.9..=2.1).contains(&fit.slope), "{}", fit.slope);
}

#[test]
fn discrete_norm_identities() {
    let ops = assemble(build_rectangle_mesh(1.0, 1.0, 6, 6).unwrap()).unwrap();
    let s = DiscreteSpectrum::compute(&ops).unwrap();
    let v = FemFunction {
        values: (0..ops.dofs())
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0)
            .collect(),
    };
    let k_form = ops.stiffness().bilinear(&v.values, &v.values).sqrt();
    assert!((s.norm_alpha(&ops, &v, 1.0).unwrap() - k_form).abs() < 1e-9);
    let av = ops.apply_ah(&v).unwrap();
    assert!((s.norm_alpha(&ops, &av, -1.0).unwrap() - ops.h1_seminorm(&v)).abs() < 1e-9);
    let one = FemFunction::constant(ops.dofs(), 1.0);
    assert!(matches!(
        s.norm_alpha(&ops, &one, -1.0),
        Err(Error::NonzeroMean { .. })
    ));
    assert!((s.norm_alpha(&ops, &one, 0.0).unwrap()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projections_fix_the_finite_element_space(values in prop::collection::vec(-2.0..2.0f64, 17)) {
        let ops = interval(16);
        let v = FemFunction { values };
        let rule = ops.rule().clone();
        let p = ops.project_l2(|x| ops.eval(&v, x).unwrap(), &rule).unwrap();
        prop_assert!(p.max_abs_diff(&v) < 1e-12);
        let g = ops.stiffness().mul(&v.values);
        let r = ops.ritz_project_load(&g, ops.mean(&v)).unwrap();
        prop_assert!(r.max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn negative_norm_is_dual_to_the_seminorm(values in prop::collection::vec(-2.0..2.0f64, 17)) {
        // |v|_{-1,h} = sup <v, w> / |w|_1, attained at the Neumann solution
        let ops = interval(16);
        let v = FemFunction { values };
        let s = DiscreteSpectrum::compute(&ops).unwrap();
        let mean = ops.mean(&v);
        let centered = FemFunction { values: v.values.iter().map(|x| x - mean).collect() };
        let a = ops.negative_norm(&v).unwrap();
        let b = s.norm_alpha(&ops, &centered, -1.0).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}
