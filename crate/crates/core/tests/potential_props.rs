use chc_core::fem::{assemble, FemFunction};
use chc_core::mesh::{build_interval_mesh, build_rectangle_mesh};
use chc_core::potential::Potential;
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

fn quartic() -> impl Strategy<Value = Potential> {
    (
        -3.0..3.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        0.05..3.0f64,
    )
        .prop_map(|(a0, a1, a2, a3, a4)| Potential::new([a0, a1, a2, a3, a4]).unwrap())
}

/// Scalar grid on [-4, 4] with step 1/64.
fn grid() -> impl Iterator<Item = f64> {
    (-256..=256).map(|i| i as f64 / 64.0)
}

fn scale(p: &Potential, x: f64, y: f64) -> f64 {
    let m = x.abs().max(y.abs()).max(1.0);
    p.coeffs().iter().map(|c| c.abs()).sum::<f64>() * m.powi(4)
}

#[test]
fn double_well_scalar_grid() {
    let p = Potential::double_well();
    assert_eq!(p.c1_squared(), 1.0);
    let c = p.local_lipschitz();
    for x in grid() {
        assert!(x * p.f(x) >= -p.dissipativity_constant() - 1e-15);
        for y in grid().step_by(7) {
            let taylor =
                p.big_f(x) - p.big_f(y) - p.f(x) * (x - y) - 0.5 * p.c1_squared() * (x - y).powi(2);
            assert!(
                taylor <= 1e-12 * scale(&p, x, y),
                "taylor at ({x}, {y}): {taylor}"
            );
            let lip = (p.f(x) - p.f(y)).abs() - c * (1.0 + x * x + y * y) * (x - y).abs();
            assert!(
                lip <= 1e-12 * scale(&p, x, y),
                "lipschitz at ({x}, {y}): {lip}"
            );
        }
    }
}

#[test]
fn finite_differences_on_a_grid() {
    let p = Potential::double_well();
    let eps = 1e-3;
    for s in grid() {
        // central differences of a quartic err by exactly eps^2 F'''(s) / 6
        let third = 6.0 * s;
        let fd = (p.big_f(s + eps) - p.big_f(s - eps)) / (2.0 * eps);
        assert!(
            (fd - p.f(s)).abs() <= eps * eps * (third.abs() / 6.0) + 1e-9,
            "F' at {s}"
        );
        let fd2 = (p.f(s + eps) - p.f(s - eps)) / (2.0 * eps);
        assert!(
            (fd2 - p.f_prime(s)).abs() <= eps * eps * 1.0 + 1e-9,
            "f' at {s}"
        );
    }
}

proptest! {
    #[test]
    fn taylor_bound(p in quartic(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let lhs = p.big_f(x) - p.big_f(y);
        let rhs = p.f(x) * (x - y) + 0.5 * p.c1_squared() * (x - y).powi(2);
        prop_assert!(lhs <= rhs + 1e-12 * scale(&p, x, y));
    }

    #[test]
    fn local_lipschitz_bound(p in quartic(), x in -5.0..5.0f64, y in -5.0..5.0f64) {
        let lhs = (p.f(x) - p.f(y)).abs();
        let rhs = p.local_lipschitz() * (1.0 + x * x + y * y) * (x - y).abs();
        prop_assert!(lhs <= rhs + 1e-12 * scale(&p, x, y));
    }

    #[test]
    fn f_is_the_derivative(p in quartic(), s in -4.0..4.0f64) {
        let a = p.coeffs();
        let eps = 1e-3;
        let third = 6.0 * a[3] + 24.0 * a[4] * s;
        let fd = (p.big_f(s + eps) - p.big_f(s - eps)) / (2.0 * eps);
        prop_assert!((fd - p.f(s)).abs() <= eps * eps * third.abs() / 6.0 + 1e-9 * scale(&p, s, 0.0));
    }

    #[test]
    fn pointwise_dissipativity(p in quartic(), s in -10.0..10.0f64) {
        prop_assert!(s * p.f(s) >= -p.dissipativity_constant() - 1e-12 * scale(&p, s, 0.0));
    }

    #[test]
    fn c1_bounds_the_second_derivative(p in quartic(), s in -10.0..10.0f64) {
        prop_assert!(p.f_prime(s) >= -p.c1_squared() - 1e-12 * scale(&p, s, 0.0));
    }
}

#[test]
fn dissipativity_on_random_fields() {
    let interval = assemble(build_interval_mesh(1.0, 32).unwrap()).unwrap();
    let rectangle = assemble(build_rectangle_mesh(2.0, 1.0, 8, 4).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let potentials = [
        Potential::double_well(),
        Potential::new([0.0, 0.3, -1.0, 0.2, 0.25]).unwrap(),
    ];
    for ops in [&interval, &rectangle] {
        let fields: Vec<FemFunction> = (0..1000)
            .map(|i| {
                let amp = 0.25 + 3.0 * (i % 8) as f64 / 8.0;
                let values = (0..ops.dofs())
                    .map(|_| amp * (2.0 * (rng.next_u64() as f64 / u64::MAX as f64) - 1.0))
                    .collect();
                FemFunction { values }
            })
            .collect();
        for p in &potentials {
            assert!(p.dissipativity_check(ops, &fields) >= -1e-10);
        }
        // the minimizer of s f(s) as a constant field attains the bound
        let p = Potential::double_well();
        let c = FemFunction::constant(ops.dofs(), 0.5f64.sqrt());
        assert!(p.dissipativity_check(ops, &[c]).abs() < 1e-12);
        assert_eq!(
            p.dissipativity_check(ops, &[FemFunction::zeros(ops.dofs())]),
            ops.measure() / 4.0
        );
    }
}

#[test]
fn functional_examples() {
    let ops = assemble(build_interval_mesh(1.0, 16).unwrap()).unwrap();
    let p = Potential::double_well();
    let n = ops.dofs();
    assert!(p.functional(&ops, &FemFunction::constant(n, 1.0)).abs() < 1e-15);
    assert!((p.functional(&ops, &FemFunction::zeros(n)) - 0.25).abs() < 1e-15);
    let ramp = FemFunction {
        values: (0..n)
            .map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0)
            .collect(),
    };
    assert!((p.functional(&ops, &ramp) - 2.0 / 15.0).abs() < 1e-14);
}
