use proptest::prelude::*;
use smlab_core::malliavin_numeric::{gamma_draw, hermite, minus_dl_inv, MehlerSpec, SmoothFunctional};
use smlab_core::rng::block_rng;

#[test]
fn hermite_polynomials_match_closed_forms() {
    for x in [-2.0, -0.3, 0.0, 1.7] {
        assert_eq!(hermite(0, x), 1.0);
        assert_eq!(hermite(1, x), x);
        assert!((hermite(2, x) - (x * x - 1.0)).abs() < 1e-14);
        assert!((hermite(3, x) - (x * x * x - 3.0 * x)).abs() < 1e-13);
    }
}

#[test]
fn mehler_matches_closed_form_on_cubic_hermite() {
    // F = H_3(xi): -DL^{-1} F = F' / 3 = xi^2 - 1
    let f = SmoothFunctional::hermite(3, 1);
    let mut rng = block_rng(4, 0);
    for xi in [-2.1, -0.4, 0.0, 0.9, 3.3] {
        let u = minus_dl_inv(&f, &[xi], &MehlerSpec::default(), &mut rng).unwrap();
        assert!((u[0] - (xi * xi - 1.0)).abs() < 1e-9, "xi={xi}: {}", u[0]);
    }
}

#[test]
fn integration_by_parts_mean_identity() {
    let f = SmoothFunctional::hermite(2, 1);
    let g = gamma_draw(&f, 20_000, 8, &MehlerSpec::default(), true).unwrap();
    assert!(g.mean_identity().covers(0.0, 4.0, 1e-12), "{:?}", g.mean_identity());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_functional_is_its_own_pseudo_gradient(a in prop::collection::vec(-3f64..3.0, 1..5), seed in any::<u64>()) {
        let dim = a.len();
        let f = SmoothFunctional::linear(a.clone());
        let mut rng = block_rng(seed, 0);
        let xi: Vec<f64> = (0..dim).map(|i| (i as f64 - 1.0) * 0.7).collect();
        let u = minus_dl_inv(&f, &xi, &MehlerSpec::default(), &mut rng).unwrap();
        for (ui, ai) in u.iter().zip(&a) {
            prop_assert!((ui - ai).abs() < 1e-10, "{ui} vs {ai}");
        }
    }
}
