//! Solutions of the Stein equation `g*(x) f'(x) - x f(x) = h(x) - E[h(Z)]`.
//!
//! With `P(x) = int_l^x Phi h'` and `Q(x) = int_x^u (1 - Phi) h'`, the
//! bounded solution is
//!
//! ```text
//! f(x)  = -((1 - Phi(x)) P(x) + Phi(x) Q(x)) / (g* rho)(x)
//! f'(x) = (I1(x) P(x) - I2(x) Q(x)) / (g*^2 rho)(x)
//! ```
//!
//! where `I1 = int_x^u (1 - Phi) = g* rho - x (1 - Phi)` and
//! `I2 = int_l^x Phi = x Phi + g* rho`. [`solve`] uses the closed forms of
//! `I1, I2` and sweeps `P, Q` cumulatively along the grid;
//! [`f_prime_repr`] recomputes every piece by direct quadrature.

pub mod test_functions;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use test_functions::{Family, TestFunction};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_sqrt_endpoints, Tolerance};
use crate::reference_laws::ReferenceLaw;

/// Solution values on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinSolution {
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub f_prime: Vec<f64>,
    /// `f'' = ((x - g*') f' + f + h') / g*`, the differentiated equation
    pub f_second: Vec<f64>,
    /// `|g* f' - x f - (h - m_h)|` at each grid point
    pub residual: Vec<f64>,
    pub m_h: f64,
    /// grid points where `g* rho` underflowed and values were carried over
    pub extended: Vec<bool>,
}

impl SteinSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_f_prime(&self) -> f64 {
        self.f_prime.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_f_second(&self) -> f64 {
        self.f_second.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-300, 1e-11)
}

/// Integral over `[a, b]` split at `breaks`, softening support endpoints.
fn integ(law: &ReferenceLaw, f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> Result<f64> {
    if a >= b {
        return Ok(0.0);
    }
    let s = law.support();
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&k| k > a && k < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let soft = (w[0] == s.l && s.l.is_finite(), w[1] == s.u && s.u.is_finite());
        total += integrate_sqrt_endpoints(&f, w[0], w[1], soft, law.std_dev(), tol())?;
    }
    Ok(total)
}

/// `E[h(Z)]` by quadrature.
pub fn expectation(law: &ReferenceLaw, h: &TestFunction) -> Result<f64> {
    let s = law.support();
    integ(law, |z| h.h(z) * law.density(z), s.l, s.u, &h.kinks)
}

/// Solves the Stein equation for `h` on `grid`.
///
/// # Errors
/// Propagates quadrature failures. Grid points where `g* rho` underflows
/// are flagged in `extended` rather than failing.
pub fn solve(law: &ReferenceLaw, h: &TestFunction, grid: &[f64]) -> Result<SteinSolution> {
    let s = law.support();
    let m_h = expectation(law, h)?;
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));

    let phi_dh = |t: f64| {
        let d = h.dh(t);
        if d == 0.0 { 0.0 } else { law.cdf(t) * d }
    };
    let sf_dh = |t: f64| {
        let d = h.dh(t);
        if d == 0.0 { 0.0 } else { law.sf(t) * d }
    };
    let mut p = vec![0.0; grid.len()];
    let mut q = vec![0.0; grid.len()];
    let (mut x0, mut acc) = (s.l, 0.0);
    for &i in &order {
        acc += integ(law, phi_dh, x0, grid[i], &h.kinks)?;
        x0 = grid[i];
        p[i] = acc;
    }
    let (mut x0, mut acc) = (s.u, 0.0);
    for &i in order.iter().rev() {
        acc += integ(law, sf_dh, grid[i], x0, &h.kinks)?;
        x0 = grid[i];
        q[i] = acc;
    }

    let n = grid.len();
    let mut sol = SteinSolution {
        grid: grid.to_vec(),
        f: vec![0.0; n],
        f_prime: vec![0.0; n],
        f_second: vec![0.0; n],
        residual: vec![0.0; n],
        m_h,
        extended: vec![false; n],
    };
    let mut last: Option<usize> = None;
    for &i in &order {
        let x = grid[i];
        let g = law.gstar(x);
        let gr = g * law.density(x);
        if !(gr > 1e-300 && gr.is_finite()) {
            sol.extended[i] = true;
            if let Some(j) = last {
                sol.f[i] = sol.f[j];
                sol.f_prime[i] = sol.f_prime[j];
                sol.f_second[i] = sol.f_second[j];
            }
            continue;
        }
        let (cdf, sf) = (law.cdf(x), law.sf(x));
        let i1 = gr - x * sf;
        let i2 = x * cdf + gr;
        let f = -(sf * p[i] + cdf * q[i]) / gr;
        let fp = (i1 * p[i] - i2 * q[i]) / (g * gr);
        let fpp = ((x - law.gstar_prime(x)) * fp + f + h.dh(x)) / g;
        sol.f[i] = f;
        sol.f_prime[i] = fp;
        sol.f_second[i] = fpp;
        sol.residual[i] = (g * fp - x * f - (h.h(x) - m_h)).abs();
        last = Some(i);
    }
    Ok(sol)
}

/// `f'(x)` with every integral evaluated by quadrature; an independent
/// route to the value produced by [`solve`].
pub fn f_prime_repr(law: &ReferenceLaw, h: &TestFunction, x: f64) -> Result<f64> {
    let s = law.support();
    let g = law.gstar(x);
    let gr = g * law.density(x);
    if !(gr > 1e-300) {
        return Err(Error::UnstableDenominator { x });
    }
    let i1 = integ(law, |t| law.sf(t), x, s.u, &[])?;
    let i2 = integ(law, |t| law.cdf(t), s.l, x, &[])?;
    let p = integ(law, |t| law.cdf(t) * h.dh(t), s.l, x, &h.kinks)?;
    let q = integ(law, |t| law.sf(t) * h.dh(t), x, s.u, &h.kinks)?;
    Ok((i1 * p - i2 * q) / (g * gr))
}

/// The coefficient functions `A(x)` and `B(x)` of the second-derivative
/// representation. Both are non-positive for full-line laws.
pub fn ab_functions(law: &ReferenceLaw, x: f64) -> (f64, f64) {
    let g = law.gstar(x);
    let gp = law.gstar_prime(x);
    let gr = g * law.density(x);
    let k = x * x - x * gp + g;
    let a = gr * (x - gp) - k * law.sf(x);
    let b = gr * (gp - x) - k * law.cdf(x);
    (a, b)
}

/// `f''(x) = (A P + B Q + g*^2 rho h'(x)) / (g*^3 rho)`.
///
/// # Errors
/// [`Error::UnsupportedSupport`] unless the law lives on the whole line.
pub fn f_second_repr(law: &ReferenceLaw, h: &TestFunction, x: f64) -> Result<f64> {
    let s = law.support();
    if !s.is_full_line() {
        return Err(Error::UnsupportedSupport);
    }
    let g = law.gstar(x);
    let gr = g * law.density(x);
    if !(gr > 1e-300) {
        return Err(Error::UnstableDenominator { x });
    }
    let (a, b) = ab_functions(law, x);
    let p = integ(law, |t| law.cdf(t) * h.dh(t), s.l, x, &h.kinks)?;
    let q = integ(law, |t| law.sf(t) * h.dh(t), x, s.u, &h.kinks)?;
    Ok((a * p + b * q + g * gr * h.dh(x)) / (g * g * gr))
}

/// Empirical Stein constants over a random family of test functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConstants {
    pub family: Family,
    pub n_functions: usize,
    pub grid_points: usize,
    /// `max ||f'|| / ||h'||` on the base grid
    pub k1: f64,
    /// same on the doubled grid
    pub k1_refined: f64,
    /// `max ||f''|| / ||h'||`, full-line laws only
    pub k2: Option<f64>,
    pub k2_refined: Option<f64>,
    pub max_residual: f64,
}

impl BoundConstants {
    /// Relative growth of `k1` when the grid is doubled.
    pub fn k1_drift(&self) -> f64 {
        (self.k1_refined - self.k1) / self.k1
    }
}

/// Sweeps `n_functions` random test functions of `family` and records the
/// largest ratios `||f'|| / ||h'||` (and `||f''|| / ||h'||` on the line).
pub fn bound_constant(
    law: &ReferenceLaw,
    family: Family,
    n_functions: usize,
    grid_points: usize,
    seed: u64,
) -> Result<BoundConstants> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = (law.quantile(0.005), law.quantile(0.995));
    let base = law.interior_grid(grid_points);
    let fine = law.interior_grid(2 * grid_points - 1);
    let full = law.support().is_full_line();
    let (mut k1, mut k1r, mut k2, mut k2r, mut res) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n_functions {
        let h = TestFunction::random(family, window, &mut rng);
        let lip = h.lipschitz;
        let a = solve(law, &h, &base)?;
        let b = solve(law, &h, &fine)?;
        k1 = k1.max(a.sup_f_prime() / lip);
        k1r = k1r.max(b.sup_f_prime() / lip);
        k2 = k2.max(a.sup_f_second() / lip);
        k2r = k2r.max(b.sup_f_second() / lip);
        res = res.max(a.max_residual()).max(b.max_residual());
    }
    Ok(BoundConstants {
        family,
        n_functions,
        grid_points,
        k1,
        k1_refined: k1r,
        k2: full.then_some(k2),
        k2_refined: full.then_some(k2r),
        max_residual: res,
    })
}
