use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smlab_core::reference_laws::ReferenceLaw;
use smlab_core::stein_solver::{ab_functions, expectation, f_prime_repr, solve, Family, TestFunction};

fn law(name: &str) -> ReferenceLaw {
    ReferenceLaw::catalog(name, &BTreeMap::new()).unwrap()
}

#[test]
fn identity_test_function_has_unit_derivative_for_normal() {
    // h(x) = x gives f = -1, f' = 0 under g* = 1; m_h = 0.
    let n = law("normal");
    let h = TestFunction::identity();
    assert!(expectation(&n, &h).unwrap().abs() < 1e-12);
    let sol = solve(&n, &h, &n.interior_grid(41)).unwrap();
    assert!(sol.f.iter().all(|f| (f + 1.0).abs() < 1e-8), "{:?}", &sol.f[..3]);
    assert!(sol.sup_f_prime() < 1e-8);
}

#[test]
fn sine_expectation_vanishes_by_symmetry() {
    for name in ["normal", "laplace", "student_t"] {
        assert!(expectation(&law(name), &TestFunction::sine()).unwrap().abs() < 1e-10, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_vanishes_for_random_lipschitz_functions(seed in any::<u64>(), pick in 0usize..3, fm in any::<bool>()) {
        let l = law(["normal", "laplace", "gamma"][pick]);
        let family = if fm { Family::FortetMourier } else { Family::Wasserstein };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = TestFunction::random(family, (l.quantile(0.01), l.quantile(0.99)), &mut rng);
        let sol = solve(&l, &h, &l.interior_grid(31)).unwrap();
        prop_assert!(sol.max_residual() < 1e-6, "{}: {:e}", l.name(), sol.max_residual());
    }

    #[test]
    fn solved_derivative_matches_integral_representation(seed in any::<u64>()) {
        let l = law("normal");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = TestFunction::random(Family::Wasserstein, (-2.5, 2.5), &mut rng);
        let grid = l.interior_grid(21);
        let sol = solve(&l, &h, &grid).unwrap();
        for (x, fp) in grid.iter().zip(&sol.f_prime) {
            let r = f_prime_repr(&l, &h, *x).unwrap();
            prop_assert!((r - fp).abs() < 1e-6 * (1.0 + fp.abs()), "x={x}: {r} vs {fp}");
        }
    }

    #[test]
    fn ab_functions_nonpositive_on_full_line_laws(u in 0.01f64..0.99, pick in 0usize..3) {
        let l = law(["normal", "laplace", "student_t"][pick]);
        let (a, b) = ab_functions(&l, l.quantile(u));
        prop_assert!(a <= 1e-12 && b <= 1e-12, "{}: A={a} B={b}", l.name());
    }
}
