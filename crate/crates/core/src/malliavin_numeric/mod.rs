//! `Y = <DF, -DL^{-1} F>` for smooth functionals of a standard Gaussian
//! vector, and regression estimates of `g_F = E[Y | F]`.
//!
//! `-DL^{-1} F = int_0^1 E'[grad F(u xi + sqrt(1 - u^2) xi')] du` (Mehler form
//! with `u = e^{-t}`), evaluated by Gauss-Legendre in `u` and an inner
//! average over antithetic, whitened draws `xi'`.

mod regression;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_chaos::{malliavin_d, ChaosPlan, ChaosVector, JTable, Noise};
use crate::quadrature::gauss_legendre_on;
use crate::rng::par_paths;
use crate::stats::{mean_se, Estimate};

pub use regression::{conditional_regress, Bin, ConditionalMean, RegressionMethod};

type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A functional `F(xi)` of `xi ~ N(0, I_n)` with its gradient.
#[derive(Clone)]
pub struct SmoothFunctional {
    pub name: String,
    pub dim: usize,
    eval: EvalFn,
    grad: Option<GradFn>,
    /// set when `F` lies in a single chaos of this order
    pub chaos_order: Option<usize>,
}

impl std::fmt::Debug for SmoothFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothFunctional")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_grad", &self.grad.is_some())
            .field("chaos_order", &self.chaos_order)
            .finish()
    }
}

impl SmoothFunctional {
    pub fn new(name: impl Into<String>, dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), dim, eval: Arc::new(eval), grad: None, chaos_order: None }
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_chaos_order(mut self, q: usize) -> Self {
        self.chaos_order = Some(q);
        self
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        (self.eval)(xi)
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    /// Analytic gradient, or central differences when none was supplied.
    pub fn gradient(&self, xi: &[f64], out: &mut [f64]) {
        match &self.grad {
            Some(g) => g(xi, out),
            None => {
                let mut p = xi.to_vec();
                for k in 0..self.dim {
                    let h = 1e-5 * (1.0 + xi[k].abs());
                    p[k] = xi[k] + h;
                    let up = self.eval(&p);
                    p[k] = xi[k] - h;
                    let dn = self.eval(&p);
                    p[k] = xi[k];
                    out[k] = (up - dn) / (2.0 * h);
                }
            }
        }
    }

    /// `<a, xi>`, first chaos.
    pub fn linear(a: Vec<f64>) -> Self {
        let b = a.clone();
        Self::new("linear", a.len(), move |x| a.iter().zip(x).map(|(a, x)| a * x).sum())
            .with_grad(move |_, g| g.copy_from_slice(&b))
            .with_chaos_order(1)
    }

    /// `H_q(xi_0)` in dimension `dim`.
    pub fn hermite(q: usize, dim: usize) -> Self {
        Self::new(format!("H{q}"), dim, move |x| hermite(q, x[0]))
            .with_grad(move |x, g| {
                g.fill(0.0);
                // H_q' = q H_{q-1}
                g[0] = if q == 0 { 0.0 } else { q as f64 * hermite(q - 1, x[0]) };
            })
            .with_chaos_order(q)
    }

    /// A chaos vector on a Gaussian grid, read as a function of the cell
    /// variables `zeta_i = M(c_i) / sqrt(mu_i)`.
    pub fn from_chaos(f: &ChaosVector) -> Result<Self> {
        let grid = f.grid().clone();
        if grid.has_jumps() {
            return Err(Error::InvalidParams("smooth functionals need a Gaussian grid".into()));
        }
        let n = grid.len();
        let plan = ChaosPlan::new(f)?;
        let d = malliavin_d(f)?;
        let dplans = d.iter().map(ChaosPlan::new).collect::<Result<Vec<_>>>()?;
        let top = plan.max_order;
        let g1 = grid.clone();
        let g2 = grid.clone();
        let roots: Vec<f64> = grid.masses.iter().map(|m| m.sqrt()).collect();
        let eval = move |x: &[f64]| {
            let mut t = JTable::new(&g1, top);
            t.fill(&g1, &Noise { values: x.to_vec() });
            plan.eval(&t)
        };
        let grad = move |x: &[f64], out: &mut [f64]| {
            let mut t = JTable::new(&g2, top);
            t.fill(&g2, &Noise { values: x.to_vec() });
            for (k, p) in dplans.iter().enumerate() {
                out[k] = roots[k] * p.eval(&t);
            }
        };
        let mut s = Self::new("chaos", n, eval).with_grad(grad);
        s.chaos_order = f.single_order();
        Ok(s)
    }

    /// Largest relative gap between the gradient and central differences
    /// over `points` random draws.
    pub fn gradient_check(&self, points: usize, rng: &mut impl Rng) -> f64 {
        let fd = Self { grad: None, ..self.clone() };
        let (mut a, mut b) = (vec![0.0; self.dim], vec![0.0; self.dim]);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let xi: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            self.gradient(&xi, &mut a);
            fd.gradient(&xi, &mut b);
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs() / scale);
            }
        }
        worst
    }
}

/// Probabilists' Hermite polynomial.
pub fn hermite(q: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if q == 0 {
        return a;
    }
    for k in 1..q {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Quadrature settings for the Mehler representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MehlerSpec {
    pub nodes: usize,
    /// inner draws per node; raised to `4 * dim` when smaller
    pub inner: usize,
    /// permit central differences when no analytic gradient exists
    pub allow_fd: bool,
}

impl Default for MehlerSpec {
    fn default() -> Self {
        Self { nodes: 32, inner: 64, allow_fd: false }
    }
}

/// Antithetic draws whose empirical covariance is exactly the identity.
fn whitened_draws(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let half = count.div_ceil(2).max(dim + 1);
    let base: Vec<DVector<f64>> = (0..half).map(|_| DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))).collect();
    let mut s = DMatrix::<f64>::zeros(dim, dim);
    for g in &base {
        s += g * g.transpose();
    }
    s /= half as f64;
    let l = s.cholesky().expect("sample covariance of > dim Gaussian draws is positive definite").l();
    let mut out = Vec::with_capacity(2 * half);
    for g in base {
        let w = l.solve_lower_triangular(&g).expect("nonsingular factor");
        out.push(w.iter().map(|v| -v).collect());
        out.push(w.as_slice().to_vec());
    }
    out
}

/// `-DL^{-1} F` at `xi`.
///
/// Exact for gradients of degree at most three: Gauss-Legendre integrates
/// the polynomial in `u`, and the inner draws match Gaussian moments up to
/// order three.
pub fn minus_dl_inv(f: &SmoothFunctional, xi: &[f64], spec: &MehlerSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if !f.has_analytic_grad() && !spec.allow_fd {
        return Err(Error::GradientUnavailable(f.name.clone()));
    }
    let n = f.dim;
    let draws = whitened_draws(n, spec.inner.max(4 * n), rng);
    let (us, ws) = gauss_legendre_on(spec.nodes, 0.0, 1.0);
    let mut out = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut p = vec![0.0; n];
    let m = draws.len() as f64;
    for (&u, &w) in us.iter().zip(&ws) {
        let v = (1.0 - u * u).sqrt();
        for d in &draws {
            for k in 0..n {
                p[k] = u * xi[k] + v * d[k];
            }
            f.gradient(&p, &mut g);
            for k in 0..n {
                out[k] += w / m * g[k];
            }
        }
    }
    Ok(out)
}

/// How `Y` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    /// `||DF||^2 / q` for a single-chaos functional
    FastPath,
    Mehler,
    /// exact chaos-algebra samples
    Chaos,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaMeta {
    pub n_paths: usize,
    pub seed: u64,
    pub method: GammaMethod,
    pub mehler: Option<MehlerSpec>,
}

/// Paired draws `(X, Y)` with `Y = <DX, -DL^{-1} X>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaSamples {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: GammaMeta,
}

impl GammaSamples {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Paired estimate of `E[Y] - E[X^2]`, zero by integration by parts.
    pub fn mean_identity(&self) -> Estimate {
        let d: Vec<f64> = self.x.iter().zip(&self.y).map(|(x, y)| y - x * x).collect();
        mean_se(&d)
    }

    /// Draws from the exact chaos sampler for `X = I_q(f)`.
    pub fn from_kernel(f: &crate::gaussian_chaos::SymmetricKernel, n_paths: usize, seed: u64) -> Result<Self> {
        let (x, y) = crate::gaussian_chaos::sample_gamma_pair(f, n_paths, seed)?;
        Ok(Self { x, y, meta: GammaMeta { n_paths, seed, method: GammaMethod::Chaos, mehler: None } })
    }
}

/// Samples `(X, Y)`, using the single-chaos shortcut when `fast_path` is
/// set and `F` declares its order.
pub fn gamma_draw(f: &SmoothFunctional, n_paths: usize, seed: u64, spec: &MehlerSpec, fast_path: bool) -> Result<GammaSamples> {
    let fast = if fast_path { f.chaos_order } else { None };
    let n = f.dim;
    let rows = par_paths(n_paths, seed, |rng| -> Result<(f64, f64)> {
        let xi: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let x = f.eval(&xi);
        let mut g = vec![0.0; n];
        f.gradient(&xi, &mut g);
        let y = match fast {
            Some(q) => g.iter().map(|v| v * v).sum::<f64>() / q as f64,
            None => {
                let m = minus_dl_inv(f, &xi, spec, rng)?;
                g.iter().zip(&m).map(|(a, b)| a * b).sum()
            }
        };
        Ok((x, y))
    });
    let mut x = Vec::with_capacity(n_paths);
    let mut y = Vec::with_capacity(n_paths);
    for r in rows {
        let (a, b) = r?;
        x.push(a);
        y.push(b);
    }
    let method = if fast.is_some() { GammaMethod::FastPath } else { GammaMethod::Mehler };
    Ok(GammaSamples { x, y, meta: GammaMeta { n_paths, seed, method, mehler: fast.is_none().then_some(*spec) } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_chaos::{GridMeasure, SymmetricKernel};
    use crate::rng::block_rng;

    #[test]
    fn linear_functional_is_its_own_projection() {
        let f = SmoothFunctional::linear(vec![0.3, -1.2, 2.0]);
        let mut rng = block_rng(1, 0);
        let m = minus_dl_inv(&f, &[0.1, 0.5, -0.7], &MehlerSpec::default(), &mut rng).unwrap();
        for (a, b) in m.iter().zip([0.3, -1.2, 2.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn chaos_projections_divide_gradient_by_order() {
        let mut rng = block_rng(2, 0);
        for q in 1..=4 {
            let f = SmoothFunctional::hermite(q, 2);
            for xi in [[0.3, 1.0], [-1.7, 0.2], [2.5, -0.4]] {
                let m = minus_dl_inv(&f, &xi, &MehlerSpec::default(), &mut rng).unwrap();
                let mut g = [0.0; 2];
                f.gradient(&xi, &mut g);
                // gradients here have degree <= 3, where the scheme is exact
                assert!((m[0] - g[0] / q as f64).abs() < 1e-10 * (1.0 + g[0].abs()), "q={q}: {} vs {}", m[0], g[0] / q as f64);
                assert!(m[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chi_square_fast_path_is_exact() {
        let f = SmoothFunctional::hermite(2, 1);
        let s = gamma_draw(&f, 2000, 3, &MehlerSpec::default(), true).unwrap();
        for (x, y) in s.x.iter().zip(&s.y) {
            assert!((y - 2.0 * (x + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_unavailable_without_fd() {
        let f = SmoothFunctional::new("no grad", 1, |x| x[0] * x[0] - 1.0);
        let mut rng = block_rng(3, 0);
        assert!(matches!(minus_dl_inv(&f, &[0.0], &MehlerSpec::default(), &mut rng), Err(Error::GradientUnavailable(_))));
        let spec = MehlerSpec { allow_fd: true, ..Default::default() };
        let m = minus_dl_inv(&f, &[0.8], &spec, &mut rng).unwrap();
        assert!((m[0] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn chaos_functional_gradient_matches_differences() {
        let g = GridMeasure::new(vec![0.5, 1.5, 1.0]).unwrap();
        let mut rng = block_rng(4, 0);
        let mut c = ChaosVector::zero(&g);
        for q in 1..=3 {
            c.add_kernel(&SymmetricKernel::random(&g, q, &mut rng).unwrap(), 1.0).unwrap();
        }
        let f = SmoothFunctional::from_chaos(&c).unwrap();
        assert!(f.chaos_order.is_none());
        assert!(f.gradient_check(20, &mut rng) < 1e-5);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(3, 2.0), 8.0 - 6.0);
        assert_eq!(hermite(4, 1.0), 1.0 - 6.0 + 3.0);
    }
}
