use chc_core::fem::assemble;
use chc_core::mesh::build_interval_mesh;
use chc_core::noise::{
    admissibility, convolution_moments, convolution_pair, project_increment, projection_rule,
    sample_increments, truncation, NoiseProjector, NoiseSpec,
};
use chc_core::rng::{tag, NormalStream};
use chc_core::spectral::{build_basis, DomainSpec, SpectralField};
use proptest::prelude::*;

/// Composite Simpson rule on [0, k].
fn simpson(f: impl Fn(f64) -> f64, k: f64, n: usize) -> f64 {
    let h = k / n as f64;
    let mut acc = f(0.0) + f(k);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn convolution_moments_match_quadrature() {
    for (lambda, k) in [
        (0.0, 0.1),
        (1e-4, 1e-3),
        (3.0, 1e-3),
        (std::f64::consts::PI.powi(2), 1e-3),
        (50.0, 0.5),
    ] {
        let a = lambda * lambda;
        let (v, c, vi) = convolution_moments(lambda, k);
        // keep the decay per Simpson panel small
        let panels = 2 * (10_000usize).max((200.0 * a * k) as usize);
        let c_ref = simpson(|s| (-a * (k - s)).exp(), k, panels);
        let vi_ref = simpson(|s| (-2.0 * a * (k - s)).exp(), k, panels);
        assert_eq!(v, k);
        assert!(
            (c - c_ref).abs() <= 1e-10 * c_ref,
            "cov at lambda {lambda}: {c} vs {c_ref}"
        );
        assert!(
            (vi - vi_ref).abs() <= 1e-10 * vi_ref,
            "var at lambda {lambda}: {vi} vs {vi_ref}"
        );
    }
}

#[test]
fn convolution_pair_limits() {
    let (db, i) = convolution_pair(0.0, 0.01, 0.7, -1.3);
    assert_eq!(db, i);
    let lambda: f64 = 1e3;
    let (_, c, v) = convolution_moments(lambda, 10.0);
    assert!((c * lambda * lambda - 1.0).abs() < 1e-12);
    assert!((v * 2.0 * lambda * lambda - 1.0).abs() < 1e-12);
}

/// Sample covariance of the pair from 10^5 draws within 4 standard errors.
#[test]
fn convolution_pair_covariance() {
    let n = 100_000;
    for (m, (lambda, k)) in [
        (std::f64::consts::PI.powi(2), 1e-3),
        (30.0, 1e-2),
        (0.05, 0.1),
    ]
    .into_iter()
    .enumerate()
    {
        let mut s = NormalStream::new(3, m as u64, tag::PAIR_CHECK, 0, 0);
        let draws: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (z1, z2) = s.next_pair();
                convolution_pair(lambda, k, z1, z2)
            })
            .collect();
        let (v, c, vi) = convolution_moments(lambda, k);
        for (want, g) in [
            (
                v,
                &(|p: &(f64, f64)| p.0 * p.0) as &dyn Fn(&(f64, f64)) -> f64,
            ),
            (c, &|p: &(f64, f64)| p.0 * p.1),
            (vi, &|p: &(f64, f64)| p.1 * p.1),
        ] {
            let vals: Vec<f64> = draws.iter().map(g).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - want).abs() <= 4.0 * se,
                "lambda {lambda}: {mean} vs {want} (se {se})"
            );
        }
    }
}

/// Coefficients of `Delta W` have covariance `k sigma^2 q_j delta_jl`.
#[test]
fn increment_covariance() {
    let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 5).unwrap();
    let spec = NoiseSpec::new(2.0, 1.5, 4, 11).unwrap();
    let (t, steps) = (0.5, 1000);
    let k = t / steps as f64;
    let samples = 100;
    // 10^5 increments per mode: 100 samples of 1000 steps
    let fields: Vec<Vec<f64>> = (0..samples)
        .flat_map(|s| {
            let inc = sample_increments(&spec, &basis, t, steps, &[1], s).unwrap();
            (0..steps)
                .map(move |i| inc.field_increment(i, 1).coeffs)
                .collect::<Vec<_>>()
        })
        .collect();
    let n = fields.len() as f64;
    for j in 0..5 {
        assert!(fields.iter().all(|f| f[0] == 0.0));
        for l in j..5 {
            let vals: Vec<f64> = fields.iter().map(|f| f[j] * f[l]).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let want = if j == l {
                k * spec.sigma.powi(2) * spec.q(j, basis.eigenvalue(j))
            } else {
                0.0
            };
            let se = (var / n).sqrt();
            assert!(
                (mean - want).abs() <= 4.0 * se + 1e-300,
                "({j}, {l}): {mean} vs {want}"
            );
        }
    }
}

#[test]
fn truncation_and_admissibility() {
    let d1 = DomainSpec::interval(1.0).unwrap();
    assert_eq!(truncation(d1, 2.0, 1e-6).unwrap(), 68);
    assert!(truncation(d1, 0.5, 1e-6).is_err());
    // sum_j (j pi)^{-2} = 1/6
    let basis = build_basis(d1, 400).unwrap();
    let spec = NoiseSpec::new(2.0, 1.0, 399, 0).unwrap();
    let a = admissibility(&spec, &basis, 0.5).unwrap();
    assert!(a.admissible);
    assert!((a.value - 1.0 / 6.0).abs() < 1e-7, "{}", a.value);
    let spec = NoiseSpec::new(1.0, 1.0, 399, 0).unwrap();
    assert!(!admissibility(&spec, &basis, 0.5).unwrap().admissible);
    let spec = NoiseSpec::new(1.0, 0.0, 399, 0).unwrap();
    let a = admissibility(&spec, &basis, 0.5).unwrap();
    assert!(a.admissible && a.value == 0.0);
}

#[test]
fn projected_increments() {
    let ops = assemble(build_interval_mesh(1.0, 32).unwrap()).unwrap();
    let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 9).unwrap();
    let projector = NoiseProjector::new(&ops, &basis, 9).unwrap();
    let zero = project_increment(&projector, &SpectralField::zeros(9)).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
    let single = project_increment(&projector, &SpectralField::mode(9, 1, 0.3).unwrap()).unwrap();
    let direct = ops.project_spectral(
        &basis,
        &SpectralField::mode(9, 1, 1.0).unwrap(),
        &projection_rule(&ops, &basis),
    );
    let direct = direct.unwrap();
    for (a, b) in single.values.iter().zip(&direct.values) {
        assert!((a - 0.3 * b).abs() < 1e-12);
    }
    let spec = NoiseSpec::new(2.0, 1.0, 8, 5).unwrap();
    let inc = sample_increments(&spec, &basis, 1.0, 10, &[1], 0).unwrap();
    for i in 0..10 {
        let w = project_increment(&projector, &inc.field_increment(i, 1)).unwrap();
        assert!(ops.mean(&w).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn increments_are_reproducible_and_nested(seed in any::<u64>(), sample in 0u64..1000, p in 0u32..4) {
        let basis = build_basis(DomainSpec::interval(1.0).unwrap(), 6).unwrap();
        let spec = NoiseSpec::new(2.0, 1.0, 5, seed).unwrap();
        let fine = 16;
        let factors = [1usize << p];
        let a = sample_increments(&spec, &basis, 1.0, fine, &[1, 2, 4, 8], sample).unwrap();
        let b = sample_increments(&spec, &basis, 1.0, fine, &factors, sample).unwrap();
        // the fine draws do not depend on the requested levels
        prop_assert_eq!(a.fine(), b.fine());
        prop_assert_eq!(a.checksum(), b.checksum());
        let f = factors[0];
        for mode in 1..6 {
            for step in 0..fine / f {
                let sum: f64 = (0..f).map(|i| a.beta(mode, step * f + i, 1)).sum();
                prop_assert_eq!(b.beta(mode, step, f), sum);
            }
        }
    }
}
