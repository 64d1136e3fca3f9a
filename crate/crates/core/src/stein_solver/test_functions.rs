//! Test functions `h` for the Stein equation.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lipschitz function with its almost-everywhere derivative.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    h: RealFn,
    dh: RealFn,
    /// `||h'||_inf`
    pub lipschitz: f64,
    /// `||h||_inf`, infinite for unbounded `h`
    pub sup_norm: f64,
    /// points where `h'` jumps, used as quadrature breakpoints
    pub kinks: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("sup_norm", &self.sup_norm)
            .field("kinks", &self.kinks)
            .finish()
    }
}

/// Normalisation classes for random test functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `||h||_L + ||h||_inf <= 1`
    FortetMourier,
    /// `||h||_L <= 1`
    Wasserstein,
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        sup_norm: f64,
        kinks: Vec<f64>,
    ) -> Self {
        Self { name: name.into(), h: Arc::new(h), dh: Arc::new(dh), lipschitz, sup_norm, kinks }
    }

    pub fn h(&self, x: f64) -> f64 {
        (self.h)(x)
    }

    pub fn dh(&self, x: f64) -> f64 {
        (self.dh)(x)
    }

    /// Continuous piecewise-linear function through `(knots[i], values[i])`
    /// continued linearly with the given end slopes.
    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>, left_slope: f64, right_slope: f64) -> Self {
        assert!(knots.len() == values.len() && !knots.is_empty());
        assert!(knots.windows(2).all(|w| w[0] < w[1]), "knots must increase");
        let mut slopes = vec![left_slope];
        slopes.extend(knots.windows(2).zip(values.windows(2)).map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0])));
        slopes.push(right_slope);
        let lip = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let sup = if left_slope == 0.0 && right_slope == 0.0 {
            values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            f64::INFINITY
        };
        let (k1, v1, s1) = (knots.clone(), values.clone(), slopes.clone());
        let h = move |x: f64| {
            let i = k1.partition_point(|&k| k <= x);
            if i == 0 {
                v1[0] + s1[0] * (x - k1[0])
            } else {
                v1[i - 1] + s1[i] * (x - k1[i - 1])
            }
        };
        let k2 = knots.clone();
        let dh = move |x: f64| slopes[k2.partition_point(|&k| k <= x)];
        Self::new("piecewise_linear", h, dh, lip, sup, knots)
    }

    /// Linear ramp from 1 down to 0 on `[c - eps, c + eps]`: a smoothed
    /// indicator of `(-inf, c]`.
    pub fn smoothed_indicator(c: f64, eps: f64) -> Self {
        let mut f = Self::piecewise_linear(vec![c - eps, c + eps], vec![1.0, 0.0], 0.0, 0.0);
        f.name = format!("ramp_indicator({c}, {eps})");
        f
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x, |_| 1.0, 1.0, f64::INFINITY, vec![])
    }

    pub fn sine() -> Self {
        Self::new("sin", f64::sin, f64::cos, 1.0, 1.0, vec![])
    }

    pub fn abs() -> Self {
        Self::new("|x|", f64::abs, |x: f64| if x < 0.0 { -1.0 } else { 1.0 }, 1.0, f64::INFINITY, vec![0.0])
    }

    /// Random piecewise-linear member of `family` with kinks in `window`.
    pub fn random(family: Family, window: (f64, f64), rng: &mut impl Rng) -> Self {
        let n = rng.random_range(3..=7);
        let (a, b) = window;
        let mut knots: Vec<f64> = (0..n).map(|_| a + (b - a) * rng.random::<f64>()).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut slopes: Vec<f64> = (0..knots.len() + 1).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if family == Family::FortetMourier {
            slopes[0] = 0.0;
            *slopes.last_mut().unwrap() = 0.0;
        }
        let m = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
        for s in slopes.iter_mut() {
            *s /= m;
        }
        let mut values = vec![rng.random_range(-1.0..=1.0)];
        for i in 1..knots.len() {
            values.push(values[i - 1] + slopes[i] * (knots[i] - knots[i - 1]));
        }
        let last = slopes.len() - 1;
        let mut f = Self::piecewise_linear(knots.clone(), values.clone(), slopes[0], slopes[last]);
        if family == Family::FortetMourier {
            // rescale so that lipschitz + sup <= 1
            let c = 1.0 / (f.lipschitz + f.sup_norm);
            let vals: Vec<f64> = values.iter().map(|v| v * c).collect();
            f = Self::piecewise_linear(knots, vals, 0.0, 0.0);
            f.name = "random_fortet_mourier".into();
        } else {
            f.name = "random_wasserstein".into();
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;

    #[test]
    fn piecewise_linear_interpolates_and_extends() {
        let f = TestFunction::piecewise_linear(vec![0.0, 1.0], vec![0.0, 2.0], -1.0, 0.5);
        assert_eq!(f.h(0.5), 1.0);
        assert_eq!(f.h(-1.0), 1.0);
        assert_eq!(f.h(3.0), 3.0);
        assert_eq!(f.dh(0.5), 2.0);
        assert_eq!(f.lipschitz, 2.0);
        assert!(f.sup_norm.is_infinite());
    }

    #[test]
    fn random_families_respect_normalisation() {
        let mut rng = block_rng(3, 0);
        for _ in 0..50 {
            let w = TestFunction::random(Family::Wasserstein, (-2.0, 2.0), &mut rng);
            assert!((w.lipschitz - 1.0).abs() < 1e-12);
            let fm = TestFunction::random(Family::FortetMourier, (-2.0, 2.0), &mut rng);
            assert!(fm.lipschitz + fm.sup_norm <= 1.0 + 1e-12);
            // sup attained at a knot
            let grid_sup = (0..=400).map(|i| fm.h(-3.0 + 6.0 * i as f64 / 400.0).abs()).fold(0.0, f64::max);
            assert!(grid_sup <= fm.sup_norm + 1e-12);
        }
    }
}
