use proptest::prelude::*;
use smlab_core::gaussian_chaos::{
    contract, generator, l_inverse, product_expand, sample, ChaosVector, GridMeasure, SymmetricKernel,
};
use smlab_core::rng::block_rng;
use smlab_core::stats::mean_of;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn kernel(q: usize, seed: u64) -> SymmetricKernel {
    let grid = GridMeasure::uniform(4, 1.0).unwrap();
    SymmetricKernel::random(&grid, q, &mut block_rng(seed, 0)).unwrap()
}

#[test]
fn isometry_holds_in_monte_carlo() {
    let f = kernel(2, 11);
    let xs = sample(&ChaosVector::single(f.clone()), 40_000, 3).unwrap();
    let m2 = mean_of(&xs, |x| x * x);
    assert!(m2.covers(2.0 * f.norm_sq(), 4.0, 0.0), "{m2:?} vs {}", 2.0 * f.norm_sq());
}

#[test]
fn first_chaos_product_is_tensor_plus_inner_product() {
    // I_1(e)^2 = I_2(e x e) + |e|^2 = H_2(I_1(e)) + 1 for a unit vector
    let grid = GridMeasure::uniform(3, 1.5).unwrap();
    let e = SymmetricKernel::unit(&grid, 0).unwrap();
    let p = product_expand(&e, &e).unwrap();
    assert!((p.mean() - 1.0).abs() < 1e-14);
    assert!((p.kernel(2).unwrap().norm_sq() - 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn product_mean_is_orthogonality(q in 1usize..4, p in 1usize..4, a in any::<u64>(), b in any::<u64>()) {
        let (f, g) = (kernel(q, a), kernel(p, b));
        let e = product_expand(&f, &g).unwrap();
        let want = if p == q { factorial(q) * f.inner(&g).unwrap() } else { 0.0 };
        prop_assert!((e.mean() - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} vs {want}", e.mean());
        prop_assert_eq!(e.max_order(), p + q);
    }

    #[test]
    fn product_expansion_is_symmetric(q in 1usize..4, p in 1usize..4, a in any::<u64>(), b in any::<u64>()) {
        let (f, g) = (kernel(q, a), kernel(p, b));
        let fg = product_expand(&f, &g).unwrap();
        let gf = product_expand(&g, &f).unwrap();
        prop_assert!(fg.max_abs_diff(&gf) < 1e-12);
    }

    #[test]
    fn full_contraction_is_inner_product(q in 1usize..4, a in any::<u64>(), b in any::<u64>()) {
        let (f, g) = (kernel(q, a), kernel(q, b));
        let c = contract(&f, &g, q).unwrap();
        prop_assert_eq!(c.order(), 0);
        prop_assert!((c.norm() - f.inner(&g).unwrap().abs()).abs() < 1e-12);
    }

    #[test]
    fn generator_inverts(q in 1usize..4, a in any::<u64>()) {
        let f = ChaosVector::single(kernel(q, a));
        let back = generator(&l_inverse(&f).unwrap());
        prop_assert!(back.max_abs_diff(&f) < 1e-12);
    }
}
