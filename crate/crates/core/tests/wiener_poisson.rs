use std::sync::Arc;

use proptest::prelude::*;
use smlab_core::rng::block_rng;
use smlab_core::stats::mean_of;
use smlab_core::wiener_poisson::{
    flagged_pairs, product_expand_wp, sample_wp, third_moment_check, JumpAtom, LevyGrid, WPKernel, WpCaps,
};
use rand::Rng;

fn levy() -> Arc<LevyGrid> {
    Arc::new(LevyGrid::uniform(2, 1.0, vec![JumpAtom { x: 0.5, nu: 3.0 }, JumpAtom { x: -0.4, nu: 2.0 }], 0.8).unwrap())
}

fn random_kernel(q: usize, seed: u64) -> WPKernel {
    let mut rng = block_rng(seed, 0);
    WPKernel::from_fn(&levy(), q, |_| rng.random_range(-1.0..1.0)).unwrap()
}

#[test]
fn flagged_pairs_for_second_order() {
    assert_eq!(flagged_pairs(2), [(1, 0), (0, 1), (0, 2)]);
    assert_eq!(flagged_pairs(1), [(0, 1)]);
}

#[test]
fn total_mass_sums_gaussian_and_jump_parts() {
    // sigma^2 T + sum nu x^2 T
    let l = levy();
    assert!((l.total_mass() - (0.64 + 3.0 * 0.25 + 2.0 * 0.16)).abs() < 1e-12);
}

#[test]
fn second_moment_is_isometric() {
    let f = random_kernel(2, 5);
    let xs = sample_wp(&f, 40_000, 2, WpCaps::default()).unwrap();
    let m = mean_of(&xs, |x| x * x);
    assert!(m.covers(f.second_moment(), 4.0, 0.0), "{m:?} vs {}", f.second_moment());
    assert!(mean_of(&xs, |x| x).covers(0.0, 4.0, 0.0));
}

#[test]
fn third_moment_splits_into_gaussian_and_jump_parts() {
    let f = random_kernel(1, 17);
    let c = third_moment_check(&f, 40_000, 6, WpCaps::default()).unwrap();
    assert!(c.diff.covers(0.0, 4.0, 1e-12), "{c:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn product_mean_is_inner_product(q in 1usize..3, p in 1usize..3, a in any::<u64>(), b in any::<u64>()) {
        let (f, g) = (random_kernel(q, a), random_kernel(p, b));
        let e = product_expand_wp(&f, &g).unwrap();
        let want = if p == q {
            let fact: f64 = (1..=q).map(|k| k as f64).product();
            fact * f.kernel().inner(g.kernel()).unwrap()
        } else {
            0.0
        };
        prop_assert!((e.mean() - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} vs {want}", e.mean());
    }
}
