//! Numerical links between a density and its Stein factor.

use serde::{Deserialize, Serialize};

use super::{ReferenceLaw, Support};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_scaled, integrate_sqrt_endpoints, Tolerance};
use crate::stats::ls_slope;

fn tol() -> Tolerance {
    // near a finite endpoint `y - l` is only known to ~1e-16 / (y - l)
    // relative accuracy, which caps what the error estimate can reach
    Tolerance::new(1e-300, 1e-10)
}

/// `g*(z)` from a density by quadrature.
///
/// For `z < 0` the left representation `-int_l^z y rho / rho(z)` is used and
/// for `z >= 0` the right one `int_z^u y rho / rho(z)`; the integrand then
/// keeps one sign and no cancellation occurs. Both agree because the law is
/// centered.
///
/// # Errors
/// [`Error::NonFiniteDensity`] when `rho(z)` is zero or not finite.
pub fn gstar_from_density(rho: &dyn Fn(f64) -> f64, support: Support, z: f64) -> Result<f64> {
    let r = rho(z);
    if !(r.is_finite() && r > 0.0) || !support.contains(z) {
        return Err(Error::NonFiniteDensity { z });
    }
    let scale = z.abs().max(1.0);
    let f = |y: f64| y * rho(y);
    let num = if z < 0.0 {
        -integrate_sqrt_endpoints(f, support.l, z, (true, false), scale, tol())?
    } else {
        integrate_sqrt_endpoints(f, z, support.u, (false, true), scale, tol())?
    };
    Ok(num / r)
}

/// `int_a^b y / g*(y) dy` for `a, b` on one side of zero. Towards a finite
/// endpoint `e` the integrand grows like `1 / |y - e|`, so the segment is
/// integrated in `t = ln |y - e|`, where it stays bounded. A quadrature
/// `g*` carries ~1e-10 relative noise there, so the target is looser.
fn exponent_segment(gstar: &dyn Fn(f64) -> f64, support: Support, a: f64, b: f64) -> Result<f64> {
    let h = |y: f64| y / gstar(y);
    let near_end = Tolerance::new(1e-300, 1e-8);
    if b < 0.0 && support.l.is_finite() {
        let l = support.l;
        integrate_scaled(|t| h(l + t.exp()) * t.exp(), (a - l).ln(), (b - l).ln(), 1.0, near_end)
    } else if b > 0.0 && support.u.is_finite() {
        let u = support.u;
        integrate_scaled(|t| -h(u - t.exp()) * t.exp(), (u - a).ln(), (u - b).ln(), 1.0, near_end)
    } else {
        integrate_scaled(h, a, b, 1.0, tol())
    }
}

/// `rho(z) = E|Z| / (2 g*(z)) exp(-int_0^z y / g*(y) dy)`.
///
/// # Errors
/// [`Error::DomainError`] when `g*(z) <= 0` or `z` is outside the support.
pub fn density_from_gstar(gstar: &dyn Fn(f64) -> f64, abs_mean: f64, support: Support, z: f64) -> Result<f64> {
    if !support.contains(z) {
        return Err(Error::DomainError(format!("z = {z} outside support")));
    }
    let g = gstar(z);
    if !(g > 0.0) {
        return Err(Error::DomainError(format!("g*({z}) = {g} is not positive")));
    }
    let e = exponent_segment(gstar, support, 0.0, z)?;
    Ok(abs_mean / (2.0 * g) * (-e).exp())
}

/// [`density_from_gstar`] on a whole grid, accumulating the exponent from
/// zero outwards so each grid gap is integrated once.
pub fn density_from_gstar_grid(
    gstar: &dyn Fn(f64) -> f64,
    abs_mean: f64,
    support: Support,
    grid: &[f64],
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut exps = vec![0.0; grid.len()];
    // right sweep
    let (mut x0, mut acc) = (0.0, 0.0);
    for &i in order.iter().filter(|&&i| grid[i] >= 0.0) {
        acc += exponent_segment(gstar, support, x0, grid[i])?;
        x0 = grid[i];
        exps[i] = acc;
    }
    let (mut x0, mut acc) = (0.0, 0.0);
    for &i in order.iter().rev().filter(|&&i| grid[i] < 0.0) {
        acc += exponent_segment(gstar, support, x0, grid[i])?;
        x0 = grid[i];
        exps[i] = acc;
    }
    grid.iter()
        .zip(&exps)
        .map(|(&z, &e)| {
            if !support.contains(z) {
                return Err(Error::DomainError(format!("z = {z} outside support")));
            }
            let g = gstar(z);
            if !(g > 0.0) {
                return Err(Error::DomainError(format!("g*({z}) = {g} is not positive")));
            }
            Ok(abs_mean / (2.0 * g) * (-e).exp())
        })
        .collect()
}

/// Behavior of `int_0^{x} y / g*(y) dy` as `x` approaches one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndBehavior {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub left: EndBehavior,
    pub right: EndBehavior,
    /// Fitted slope of `log2 |increment|` per halving step near each end.
    pub left_slope: f64,
    pub right_slope: f64,
    pub left_partial: Vec<f64>,
    pub right_partial: Vec<f64>,
}

impl GrowthReport {
    /// `Ok(true)` when both ends diverge as required.
    ///
    /// # Errors
    /// [`Error::Inconclusive`] when neither end fails but one is undecided.
    pub fn passes(&self) -> Result<bool> {
        use EndBehavior::*;
        match (self.left, self.right) {
            (Diverges, Diverges) => Ok(true),
            (Converges, _) | (_, Converges) => Ok(false),
            _ => Err(Error::Inconclusive("growth of int y/g* not resolved within 40 halvings".into())),
        }
    }
}

const GROWTH_STEPS: usize = 40;
const GROWTH_BOUND: f64 = 1e3;

fn end_behavior(gstar: &dyn Fn(f64) -> f64, end: f64, sign: f64) -> Result<(EndBehavior, f64, Vec<f64>)> {
    // truncation points approach `end` geometrically (factor 2)
    let point = |k: usize| {
        if end.is_finite() {
            end * (1.0 - 0.5f64.powi(k as i32))
        } else {
            sign * 2f64.powi(k as i32 - 1)
        }
    };
    let mut partial = Vec::with_capacity(GROWTH_STEPS);
    let mut incs = Vec::with_capacity(GROWTH_STEPS);
    let mut acc = 0.0;
    let mut prev = if end.is_finite() { 0.0 } else { point(0) };
    if !end.is_finite() {
        acc = integrate_scaled(|y| y / gstar(y), 0.0, prev, 1.0, tol())?;
    }
    for k in 1..=GROWTH_STEPS {
        let x = point(k);
        if x == prev {
            break;
        }
        // only the size of the increment matters here, and near a finite
        // end `x - l` carries few significant digits
        let inc = integrate_scaled(|y| y / gstar(y), prev, x, (x - prev).abs(), Tolerance::new(1e-300, 1e-7))?;
        acc += inc;
        partial.push(acc);
        incs.push(inc.abs());
        prev = x;
        if acc.abs() > GROWTH_BOUND {
            return Ok((EndBehavior::Diverges, f64::NAN, partial));
        }
    }
    // A truncated integral that stays below the bound is classified by how
    // fast its increments decay: constant increments are a logarithmic
    // divergence, geometric decay is convergence.
    let tail: Vec<f64> = incs.iter().rev().take(12).rev().copied().collect();
    let ks: Vec<f64> = (0..tail.len()).map(|k| k as f64).collect();
    let logs: Vec<f64> = tail.iter().map(|v| v.max(1e-300).log2()).collect();
    let slope = ls_slope(&ks, &logs);
    let verdict = if slope >= -0.05 {
        EndBehavior::Diverges
    } else if slope <= -0.25 {
        EndBehavior::Converges
    } else {
        EndBehavior::Inconclusive
    };
    Ok((verdict, slope, partial))
}

/// Checks that `int_l^0 y/g* = -inf` and `int_0^u y/g* = +inf`.
///
/// A side diverges when its truncated integral exceeds `1e3` in magnitude
/// within 40 halvings towards the endpoint, or when the increments per
/// halving stop decaying (logarithmic divergence).
pub fn check_growth(gstar: &dyn Fn(f64) -> f64, support: Support) -> Result<GrowthReport> {
    let (left, left_slope, left_partial) = end_behavior(gstar, support.l, -1.0)?;
    let (right, right_slope, right_partial) = end_behavior(gstar, support.u, 1.0)?;
    Ok(GrowthReport { left, right, left_slope, right_slope, left_partial, right_partial })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub witness: String,
}

impl CheckOutcome {
    fn pass(w: impl Into<String>) -> Self {
        Self { passed: true, witness: w.into() }
    }
    fn fail(w: impl Into<String>) -> Self {
        Self { passed: false, witness: w.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a: CheckOutcome,
    pub b: CheckOutcome,
    /// Only defined for full-line supports.
    pub b_prime: Option<CheckOutcome>,
}

fn tail_points(law: &ReferenceLaw) -> (Vec<f64>, Vec<f64>) {
    let Support { l, u } = law.support();
    let s = law.std_dev();
    let toward = |end: f64, sign: f64| -> Vec<f64> {
        (1..=30)
            .map(|k| if end.is_finite() { end * (1.0 - 0.5f64.powi(k)) } else { sign * s * 2f64.powi(k - 1) })
            .collect()
    };
    (toward(l, -1.0), toward(u, 1.0))
}

/// Regularity assumptions on the law, checked on the interior grid and
/// along geometric sequences towards each endpoint.
pub fn check_assumptions(law: &ReferenceLaw) -> Result<AssumptionReport> {
    let grid = law.interior_grid(200);
    let Support { l, u } = law.support();
    let t = Tolerance::default();
    let soft = law.soft_endpoints();
    let s = law.std_dev();

    // A: a centered law with a positive finite density and positive g*.
    let mass = integrate_sqrt_endpoints(|z| law.density(z), l, u, soft, s, t)?;
    let mean = integrate_sqrt_endpoints(|z| z * law.density(z), l, u, soft, s, t)?;
    let a = if !law.support().contains(0.0) {
        CheckOutcome::fail("0 is not interior to the support")
    } else if (mass - 1.0).abs() > 1e-8 {
        CheckOutcome::fail(format!("density mass {mass}"))
    } else if mean.abs() > 1e-8 * s.max(1.0) {
        CheckOutcome::fail(format!("mean {mean}"))
    } else if let Some(z) = grid.iter().find(|&&z| !(law.density(z).is_finite() && law.density(z) > 0.0)) {
        CheckOutcome::fail(format!("density not positive and finite at {z}"))
    } else if let Some(z) = grid.iter().find(|&&z| !(law.gstar(z) > 0.0)) {
        CheckOutcome::fail(format!("g* not positive at {z}"))
    } else {
        CheckOutcome::pass(format!("mass {mass:.3e} off one, mean {mean:.3e}"))
    };

    // B: a C^1 comparison function with g*/g~ bounded, g~' settling at
    // the endpoints and g* bounded below at infinite ends.
    let (lt, rt) = tail_points(law);
    let surrogate = |z: f64| match law.kind() {
        super::LawKind::Laplace { c } => (1.0 + (c * c * z * z + 1.0).sqrt()) / (c * c),
        _ => law.gstar(z),
    };
    let surrogate_prime = |z: f64| match law.kind() {
        super::LawKind::Laplace { c } => z / (c * c * z * z + 1.0).sqrt(),
        _ => law.gstar_prime(z),
    };
    let mut b = CheckOutcome::pass("g~ = g*");
    if matches!(law.kind(), super::LawKind::Laplace { .. }) {
        b = CheckOutcome::pass("g~ = (1 + sqrt(c^2 z^2 + 1)) / c^2");
    }
    for (pts, end) in [(&lt, l), (&rt, u)] {
        let ratio_ok = pts.iter().chain(grid.iter()).all(|&z| {
            let r = law.gstar(z) / surrogate(z);
            r.is_finite() && r > 1e-3 && r < 1e3
        });
        if !ratio_ok {
            b = CheckOutcome::fail("g*/g~ unbounded");
            break;
        }
        let d: Vec<f64> = pts.iter().map(|&z| surrogate_prime(z)).collect();
        // settles: successive changes shrink, or the sequence runs off
        // monotonically to an infinite limit
        let last = &d[d.len() - 8..];
        let diffs: Vec<f64> = last.windows(2).map(|w| w[1] - w[0]).collect();
        let monotone = diffs.iter().all(|x| *x >= 0.0) || diffs.iter().all(|x| *x <= 0.0);
        let shrinking = diffs.last().unwrap().abs() <= 1e-3 * (1.0 + last.last().unwrap().abs());
        if !(monotone || shrinking) {
            b = CheckOutcome::fail(format!("g~' oscillates near {end}"));
            break;
        }
        if !end.is_finite() {
            let lo = pts.iter().map(|&z| law.gstar(z)).fold(f64::INFINITY, f64::min);
            if !(lo > 0.0) {
                b = CheckOutcome::fail(format!("liminf g* = {lo} at {end}"));
                break;
            }
        }
    }

    // B': only meaningful on the whole line.
    let b_prime = if law.support().is_full_line() {
        let worst = grid.iter().chain(&lt).chain(&rt).map(|&z| law.gstar_second(z)).fold(f64::NEG_INFINITY, f64::max);
        let q = |x: f64| {
            let gp = law.gstar_prime(x);
            (x - gp).abs() / (x * x - x * gp + law.gstar(x))
        };
        let tail_q: Vec<f64> = lt.iter().chain(&rt).map(|&x| q(x)).collect();
        let bounded = tail_q.iter().all(|v| v.is_finite()) && {
            let far = lt.iter().chain(&rt).zip(&tail_q).filter(|(x, _)| x.abs() > 8.0 * s).map(|(_, v)| *v);
            far.fold(0.0, f64::max) <= 2.0 * tail_q.iter().copied().fold(0.0, f64::max).max(1e-12)
        };
        Some(if worst >= 2.0 {
            CheckOutcome::fail(format!("sup g*'' = {worst}"))
        } else if !bounded {
            CheckOutcome::fail("|x - g*'| / (x^2 - x g*' + g*) unbounded")
        } else {
            let note = if matches!(law.kind(), super::LawKind::Laplace { .. }) { " (almost everywhere)" } else { "" };
            CheckOutcome::pass(format!("sup g*'' = {worst:.4}{note}"))
        })
    } else {
        None
    };
    Ok(AssumptionReport { a, b, b_prime })
}

#[cfg(test)]
mod tests {
    use super::super::CATALOG_NAMES;
    use super::*;
    use std::collections::BTreeMap;

    fn power_gstar(p: f64, l: f64) -> impl Fn(f64) -> f64 {
        move |x: f64| (x - l).powf(p)
    }

    #[test]
    fn growth_iff_p_between_one_and_two() {
        let support = Support { l: -1.0, u: f64::INFINITY };
        for (p, expect) in [(0.5, false), (1.0, true), (1.5, true), (2.0, true), (2.5, false)] {
            let g = power_gstar(p, -1.0);
            let rep = check_growth(&g, support).unwrap();
            assert_eq!(rep.passes().unwrap(), expect, "p = {p}: {:?} {:?}", rep.left, rep.right);
        }
    }

    #[test]
    fn catalog_laws_pass_growth_and_assumptions() {
        for name in CATALOG_NAMES {
            let law = ReferenceLaw::catalog(name, &BTreeMap::new()).unwrap();
            let g = |z: f64| law.gstar(z);
            assert!(check_growth(&g, law.support()).unwrap().passes().unwrap(), "{name}");
            let rep = check_assumptions(&law).unwrap();
            assert!(rep.a.passed, "{name}: {}", rep.a.witness);
            assert!(rep.b.passed, "{name}: {}", rep.b.witness);
            if let Some(bp) = rep.b_prime {
                assert!(bp.passed, "{name}: {}", bp.witness);
            }
        }
    }

    #[test]
    fn normal_gstar_from_density_is_one() {
        let rho = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for z in [-5.0, -1.0, 0.0, 0.7, 6.0] {
            let g = gstar_from_density(&rho, Support::REAL_LINE, z).unwrap();
            assert!((g - 1.0).abs() < 1e-10, "z = {z}: {g}");
        }
    }

    #[test]
    fn zero_density_rejected() {
        let rho = |_z: f64| 0.0;
        assert!(matches!(gstar_from_density(&rho, Support::REAL_LINE, 0.0), Err(Error::NonFiniteDensity { .. })));
    }
}
