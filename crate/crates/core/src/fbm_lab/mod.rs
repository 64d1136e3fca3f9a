//! Fractional Gaussian noise and the quadratic functional `F_T`.
//!
//! `H_T = T^{-H} sum_{s<T} (f(X_s) - mu_f)` for unit-step fGn `X`, and
//! `F_T = (H_T / Sigma)^2 - E[(H_T / Sigma)^2]` with `Sigma^2 = c_1^2 kappa`,
//! where `kappa = T^{-2H} sum_{s,t<T} C(t - s)`. For unit-step fGn the double
//! sum is `Var(B^H_T) = T^{2H}`, so `kappa = 1` at every `T` and `F_T`
//! tends to a centered chi-square with one degree of freedom.

mod generator;
mod scaling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::malliavin_numeric::hermite;
use crate::quadrature::gauss_hermite_normal;
use crate::stats::{bootstrap_se, nonincreasing_within, Estimate};

pub use generator::{fgn_covariance, simulate_fgn, FgnGenerator, FgnMethod, FgnPaths, MAX_STEPS, MAX_VALUES};
pub use scaling::{lt_scaling_probe, random_forest_exponents, ExponentGraph, LtProbe, Regime};

/// Polynomial subordination `f(x) = sum_k a_k x^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subordination {
    pub coeffs: Vec<f64>,
}

impl Subordination {
    pub fn identity() -> Self {
        Self { coeffs: vec![0.0, 1.0] }
    }

    /// `x + a x^3`
    pub fn cubic(a: f64) -> Self {
        Self { coeffs: vec![0.0, 1.0, 0.0, a] }
    }

    pub fn square() -> Self {
        Self { coeffs: vec![0.0, 0.0, 1.0] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * x + k as f64 * a)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&a| a != 0.0).unwrap_or(0)
    }

    /// Pure `a x`, for which `E[(H_T / Sigma)^2] = 1` exactly.
    pub fn is_linear(&self) -> bool {
        self.degree() <= 1 && self.coeffs.first().is_none_or(|&a| a == 0.0)
    }
}

/// `c_q = E[H_q(Z) f(Z)] / q!` for `q = 0..=max_q` by Gauss-Hermite with
/// `nodes` points, checked against a rule with twice as many nodes.
///
/// # Errors
/// [`Error::QuadratureFailure`] when the two rules disagree beyond `1e-10`
/// relative.
pub fn hermite_coeffs(f: impl Fn(f64) -> f64, max_q: usize, nodes: usize) -> Result<Vec<f64>> {
    let rule = |n: usize| -> Vec<f64> {
        let (x, w) = gauss_hermite_normal(n);
        let fx: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let mut fact = 1.0;
        (0..=max_q)
            .map(|q| {
                if q > 0 {
                    fact *= q as f64;
                }
                x.iter().zip(&w).zip(&fx).map(|((&xi, &wi), &fi)| wi * hermite(q, xi) * fi).sum::<f64>() / fact
            })
            .collect()
    };
    let (a, b) = (rule(nodes), rule(2 * nodes));
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (q, (x, y)) in a.iter().zip(&b).enumerate() {
        if (x - y).abs() > 1e-10 * scale {
            return Err(Error::QuadratureFailure { a: q as f64, b: q as f64, value: *y, abs_err: (x - y).abs() });
        }
    }
    Ok(b)
}

/// Experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgnConfig {
    pub hurst: f64,
    pub n_paths: usize,
    pub f: Subordination,
    pub seed: u64,
}

impl FgnConfig {
    /// # Errors
    /// [`Error::DomainError`] unless `1/2 < H < 1`; [`Error::SigmaZero`]
    /// when `c_1 = E[Z f(Z)]` vanishes.
    pub fn validate(&self) -> Result<FunctionalSpec> {
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(Error::DomainError(format!("Hurst index {} outside (1/2, 1)", self.hurst)));
        }
        if self.n_paths < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: self.n_paths });
        }
        FunctionalSpec::new(&self.f, self.hurst)
    }
}

/// Constants of `F_T` for a given subordination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub hurst: f64,
    pub f: Subordination,
    pub mu_f: f64,
    pub c1: f64,
    /// `c_1^2 kappa` with `kappa = 1`
    pub sigma_sq: f64,
}

impl FunctionalSpec {
    pub fn new(f: &Subordination, hurst: f64) -> Result<Self> {
        let nodes = (f.degree() + 8).max(16);
        let c = hermite_coeffs(|x| f.eval(x), 1, nodes)?;
        if c[1].abs() < 1e-12 {
            return Err(Error::SigmaZero(c[1]));
        }
        Ok(Self { hurst, f: f.clone(), mu_f: c[0], c1: c[1], sigma_sq: c[1] * c[1] })
    }

    /// `(H_T / Sigma)^2` for one path of length `T`.
    pub fn f_tilde(&self, path: &[f64]) -> f64 {
        let t = path.len() as f64;
        let h = path.iter().map(|&x| self.f.eval(x) - self.mu_f).sum::<f64>() * t.powf(-self.hurst);
        h * h / self.sigma_sq
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// `E[F~_T] = 1` exactly, for linear `f`
    ClosedForm,
    /// mean over the same ensemble, bias `O(1 / paths)`
    Ensemble,
}

/// Samples of `F_T` and the centering that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSamples {
    pub t: usize,
    pub centering: Centering,
    pub mean_f_tilde: Estimate,
    pub values: Vec<f64>,
}

/// Samples `F_T` from `n_paths` fGn paths of length `t`.
pub fn functional_ft(spec: &FunctionalSpec, t: usize, n_paths: usize, seed: u64) -> Result<FunctionalSamples> {
    let gen = FgnGenerator::new(spec.hurst, t)?;
    let tilde = gen.map_paths(n_paths, seed, |p| spec.f_tilde(p));
    let mean = crate::stats::mean_se(&tilde);
    let (centering, c) = if spec.f.is_linear() { (Centering::ClosedForm, 1.0) } else { (Centering::Ensemble, mean.value) };
    Ok(FunctionalSamples { t, centering, mean_f_tilde: mean, values: tilde.iter().map(|v| v - c).collect() })
}

/// Limits of the second, third and fourth moments of a centered
/// chi-square with one degree of freedom.
pub const CHI2_TARGETS: [f64; 3] = [2.0, 8.0, 60.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRow {
    pub t: usize,
    pub m2: Estimate,
    pub m3: Estimate,
    pub m4: Estimate,
    pub mean_f_tilde: Estimate,
    pub centering: Centering,
}

impl LadderRow {
    pub fn moments(&self) -> [Estimate; 3] {
        [self.m2, self.m3, self.m4]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentLadder {
    pub hurst: f64,
    pub f: Subordination,
    pub n_paths: usize,
    pub rows: Vec<LadderRow>,
}

const BOOTSTRAP_REPS: usize = 100;

fn moment(xs: &[f64], k: i32) -> f64 {
    xs.iter().map(|v| v.powi(k)).sum::<f64>() / xs.len() as f64
}

/// Moments of `F_T` along `t_list`, with bootstrap standard errors.
pub fn moment_ladder(config: &FgnConfig, t_list: &[usize]) -> Result<MomentLadder> {
    let spec = config.validate()?;
    if t_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("T ladder must be increasing".into()));
    }
    let rows = t_list
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let seed = crate::rng::derive_seed(config.seed, i as u64);
            let s = functional_ft(&spec, t, config.n_paths, seed)?;
            let est = |k: i32| Estimate {
                value: moment(&s.values, k),
                stderr: bootstrap_se(&s.values, BOOTSTRAP_REPS, crate::rng::derive_seed(seed, k as u64), |b| moment(b, k)),
            };
            Ok(LadderRow { t, m2: est(2), m3: est(3), m4: est(4), mean_f_tilde: s.mean_f_tilde, centering: s.centering })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentLadder { hurst: config.hurst, f: config.f.clone(), n_paths: config.n_paths, rows })
}

/// Terminal and trend verdict for one moment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderVerdict {
    pub moment: usize,
    pub target: f64,
    pub terminal: Estimate,
    pub band: f64,
    pub within_band: bool,
    /// distance to target never grows by more than two combined errors
    pub approaching: bool,
}

impl MomentLadder {
    /// Checks `|m_k - target| <= band_k` at the last rung and a monotone
    /// approach along the ladder.
    pub fn verdicts(&self, bands: [f64; 3]) -> Vec<LadderVerdict> {
        (0..3)
            .map(|k| {
                let target = CHI2_TARGETS[k];
                let path: Vec<Estimate> = self.rows.iter().map(|r| r.moments()[k]).collect();
                let gaps: Vec<Estimate> = path.iter().map(|e| Estimate { value: (e.value - target).abs(), stderr: e.stderr }).collect();
                let terminal = *path.last().expect("nonempty ladder");
                LadderVerdict {
                    moment: k + 2,
                    target,
                    terminal,
                    band: bands[k],
                    within_band: (terminal.value - target).abs() <= bands[k],
                    approaching: nonincreasing_within(&gaps, 2.0),
                }
            })
            .collect()
    }

    /// Long-format rows `(T, moment, value, stderr)`.
    pub fn long_format(&self) -> Vec<(usize, String, f64, f64)> {
        self.rows
            .iter()
            .flat_map(|r| {
                [("m2", r.m2), ("m3", r.m3), ("m4", r.m4)].into_iter().map(move |(n, e)| (r.t, n.to_string(), e.value, e.stderr))
            })
            .collect()
    }
}

/// `T^{-2H} sum_{s,t<T} C(t - s)` for unit-step fGn.
pub fn covariance_mass(hurst: f64, t: usize) -> f64 {
    let tf = t as f64;
    let s: f64 = (1..t).map(|k| 2.0 * (tf - k as f64) * fgn_covariance(hurst, k as f64)).sum::<f64>() + tf;
    s * tf.powf(-2.0 * hurst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_coefficients_of_polynomials() {
        let c = hermite_coeffs(|x| x, 4, 16).unwrap();
        assert!((c[1] - 1.0).abs() < 1e-13);
        assert!(c.iter().enumerate().filter(|(q, _)| *q != 1).all(|(_, v)| v.abs() < 1e-13));
        let c = hermite_coeffs(|x| x * x * x, 5, 16).unwrap();
        let want = [0.0, 3.0, 0.0, 1.0, 0.0, 0.0];
        assert!(c.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{c:?}");
    }

    #[test]
    fn square_is_rejected() {
        assert!(matches!(FunctionalSpec::new(&Subordination::square(), 0.7), Err(Error::SigmaZero(_))));
    }

    #[test]
    fn hurst_must_exceed_one_half() {
        let cfg = FgnConfig { hurst: 0.5, n_paths: 10, f: Subordination::identity(), seed: 0 };
        assert!(matches!(cfg.validate(), Err(Error::DomainError(_))));
    }

    #[test]
    fn polynomial_helpers() {
        let f = Subordination::cubic(0.1);
        assert!((f.eval(2.0) - 2.8).abs() < 1e-15);
        assert!((f.derivative(2.0) - 2.2).abs() < 1e-15);
        assert!(Subordination::identity().is_linear());
        assert!(!f.is_linear());
    }

    #[test]
    fn covariance_mass_is_one() {
        for h in [0.6, 0.7, 0.9] {
            for t in [2, 100, 5000] {
                assert!((covariance_mass(h, t) - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn small_t_is_finite() {
        let cfg = FgnConfig { hurst: 0.7, n_paths: 2000, f: Subordination::identity(), seed: 3 };
        let l = moment_ladder(&cfg, &[2]).unwrap();
        assert!(l.rows[0].moments().iter().all(|e| e.value.is_finite() && e.stderr > 0.0));
    }
}
