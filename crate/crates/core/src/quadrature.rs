//! One-dimensional quadrature.
//!
//! [`integrate`] is a globally adaptive Gauss-Kronrod (7/15) integrator.
//! Half-lines and the full line are mapped to `[0, 1)` with
//! `x = a + s t / (1 - t)`. Finite endpoints where the integrand may carry
//! an inverse square-root singularity can be softened with
//! [`integrate_sqrt_endpoints`]. Fixed Gauss-Legendre and Gauss-Hermite
//! rules are provided for the Mehler integral and Hermite coefficients.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute and relative targets for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-300, rel: 1e-11, max_intervals: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn adapt_finite(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    // pieces that cannot be split further in floating point
    let mut frozen_err = 0.0;
    let mut frozen_val = 0.0;
    let mut count = 1usize;
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureFailure { a, b, value: total, abs_err: total_err });
        }
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok((total, total_err));
        }
        let Some(p) = heap.pop() else {
            break;
        };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b || (p.b - p.a) < 1e-15 * p.a.abs().max(p.b.abs()) {
            frozen_err += p.err;
            frozen_val += p.value;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
        count += 1;
        if count >= tol.max_intervals {
            break;
        }
    }
    // Recompute the sums from scratch to shed accumulated cancellation.
    let value: f64 = heap.iter().map(|p| p.value).sum::<f64>() + frozen_val;
    let err: f64 = heap.iter().map(|p| p.err).sum::<f64>() + frozen_err;
    if err <= tol.abs.max(tol.rel * value.abs()) * 10.0 {
        Ok((value, err))
    } else {
        Err(Error::QuadratureFailure { a, b, value, abs_err: err })
    }
}

/// Integrates `f` over `[a, b]`; either bound may be infinite.
///
/// `scale` sets the length scale of the half-line map and should be of
/// the order of the integrand's decay length.
///
/// # Errors
/// [`Error::QuadratureFailure`] when the error target is not met.
pub fn integrate_scaled(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    scale: f64,
    tol: Tolerance,
) -> Result<f64> {
    integrate_dyn(&mut f, a, b, scale, tol)
}

fn integrate_dyn(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, scale: f64, tol: Tolerance) -> Result<f64> {
    if a > b {
        return integrate_dyn(f, b, a, scale, tol).map(|v| -v);
    }
    let s = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let out = match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt_finite(f, a, b, tol)?.0,
        (true, false) => {
            let mut g = |t: f64| {
                let d = 1.0 - t;
                let v = f(a + s * t / d);
                if v == 0.0 { 0.0 } else { v * s / (d * d) }
            };
            adapt_finite(&mut g, 0.0, 1.0, tol)?.0
        }
        (false, true) => {
            let mut g = |t: f64| {
                let d = 1.0 - t;
                let v = f(b - s * t / d);
                if v == 0.0 { 0.0 } else { v * s / (d * d) }
            };
            adapt_finite(&mut g, 0.0, 1.0, tol)?.0
        }
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, s, tol)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, s, tol)?;
            left + right
        }
    };
    Ok(out)
}

/// [`integrate_scaled`] with unit scale and default tolerance.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    integrate_scaled(f, a, b, 1.0, Tolerance::default())
}

/// Integrates piecewise over `[a, b]` split at the interior `breaks`.
pub fn integrate_with_breaks(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    scale: f64,
    tol: Tolerance,
) -> Result<f64> {
    if a > b {
        return integrate_with_breaks(f, b, a, breaks, scale, tol).map(|v| -v);
    }
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for &p in pts.iter().chain(std::iter::once(&b)) {
        total += integrate_scaled(&mut f, lo, p, scale, tol)?;
        lo = p;
    }
    Ok(total)
}

/// Integrates over `[a, b]` with a square-root change of variables at each
/// finite endpoint flagged in `soft`, which removes `|x - a|^(-1/2)` type
/// singularities. Infinite endpoints fall back to the half-line map.
pub fn integrate_sqrt_endpoints(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    soft: (bool, bool),
    scale: f64,
    tol: Tolerance,
) -> Result<f64> {
    if a > b {
        return integrate_sqrt_endpoints(f, b, a, (soft.1, soft.0), scale, tol).map(|v| -v);
    }
    let soft_a = soft.0 && a.is_finite();
    let soft_b = soft.1 && b.is_finite();
    if !soft_a && !soft_b {
        return integrate_scaled(f, a, b, scale, tol);
    }
    // Split so that each softened endpoint owns a finite piece.
    let mid = match (a.is_finite(), b.is_finite()) {
        (true, true) => 0.5 * (a + b),
        (true, false) => a + scale,
        _ => b - scale,
    };
    let mut total = 0.0;
    if soft_a {
        let w = (mid - a).sqrt();
        total += integrate_scaled(|t: f64| 2.0 * t * f(a + t * t), 0.0, w, scale, tol)?;
    } else {
        total += integrate_scaled(&mut f, a, mid, scale, tol)?;
    }
    if soft_b {
        let w = (b - mid).sqrt();
        total += integrate_scaled(|t: f64| 2.0 * t * f(b - t * t), 0.0, w, scale, tol)?;
    } else {
        total += integrate_scaled(&mut f, mid, b, scale, tol)?;
    }
    Ok(total)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Gauss-Hermite rule for the standard normal weight: `E[f(Z)] ~ sum w_i f(x_i)`.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Physicists' roots by Newton iteration on orthonormal recurrences.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let xs: Vec<f64> = x.iter().rev().map(|v| v * std::f64::consts::SQRT_2).collect();
    let ws: Vec<f64> = w.iter().rev().map(|v| v / sqrt_pi).collect();
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_full_line() {
        let v = integrate(|x: f64| (-0.5 * x * x).exp(), f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(|x: f64| x.exp(), 0.0, 1.0).unwrap();
        let b = integrate(|x: f64| x.exp(), 1.0, 0.0).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn heavy_tail_half_line() {
        // int_1^inf x^-3 = 1/2
        let v = integrate_scaled(|x: f64| x.powi(-3), 1.0, f64::INFINITY, 1.0, Tolerance::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-11);
    }

    #[test]
    fn sqrt_singularity() {
        // int_0^1 x^-1/2 = 2
        let v = integrate_sqrt_endpoints(|x: f64| x.powf(-0.5), 0.0, 1.0, (true, false), 1.0, Tolerance::default())
            .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kink_with_breaks() {
        let v = integrate_with_breaks(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1.0, Tolerance::default()).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }

    #[test]
    fn legendre_rule_integrates_degree_63() {
        let (x, w) = gauss_legendre_on(32, 0.0, 1.0);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(63)).sum();
        assert!((v - 1.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_gives_normal_moments() {
        let (x, w) = gauss_hermite_normal(40);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(8) - 105.0).abs() < 1e-9);
    }
}
