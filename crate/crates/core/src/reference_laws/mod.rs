//! Centered one-dimensional reference laws described by their Stein factor.
//!
//! Every law `Z` in the catalog has mean zero and is described by its
//! density `rho`, distribution function `Phi` and Stein factor
//!
//! ```text
//! g*(z) = int_z^u y rho(y) dy / rho(z)
//! ```
//!
//! on its support `(l, u)`. All twelve closed forms are implemented here.
//! The checks that tie `rho` and `g*` together numerically live in
//! [`checks`]; the Pearson-family moment identities live in [`pearson`].

pub mod checks;
pub mod pearson;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_scaled, integrate_sqrt_endpoints, Tolerance};

pub use checks::{
    check_assumptions, check_growth, density_from_gstar, density_from_gstar_grid, gstar_from_density,
    AssumptionReport, CheckOutcome, EndBehavior, GrowthReport,
};
pub use pearson::{pearson_gz_stats, pearson_moment, GzStats, PearsonParams};

/// Open interval `(l, u)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub l: f64,
    pub u: f64,
}

impl Support {
    pub const REAL_LINE: Support = Support { l: f64::NEG_INFINITY, u: f64::INFINITY };

    pub fn contains(&self, z: f64) -> bool {
        z > self.l && z < self.u
    }

    pub fn is_full_line(&self) -> bool {
        !self.l.is_finite() && !self.u.is_finite()
    }
}

/// Names accepted by [`ReferenceLaw::catalog`].
pub const CATALOG_NAMES: [&str; 12] = [
    "normal",
    "gamma",
    "chi2",
    "exponential",
    "beta",
    "pearson4",
    "student_t",
    "inverse_gamma",
    "uniform",
    "pareto",
    "laplace",
    "lognormal",
];

/// The twelve catalog families with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind {
    Normal { sigma: f64 },
    /// Shape `r`, scale `s`.
    Gamma { r: f64, s: f64 },
    Chi2 { v: f64 },
    Exponential { lambda: f64 },
    Beta { r: f64, s: f64 },
    PearsonIv { r: f64, s: f64 },
    StudentT { v: f64 },
    InverseGamma { r: f64, s: f64 },
    Uniform { u: f64 },
    Pareto { c: f64, l: f64 },
    Laplace { c: f64 },
    Lognormal { delta: f64, sigma: f64 },
}

/// Serializable description `{name, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// A centered reference law with cached normalisation data.
#[derive(Debug, Clone)]
pub struct ReferenceLaw {
    kind: LawKind,
    support: Support,
    /// log normalising constant where one is computed numerically
    log_norm: f64,
    abs_mean: f64,
    sd: f64,
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn require(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(msg.to_string()))
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

impl ReferenceLaw {
    /// Builds a catalog law. Missing parameters take documented defaults.
    ///
    /// # Errors
    /// [`Error::UnknownLaw`] for an unknown name and
    /// [`Error::InvalidParams`] for out-of-range or unknown parameters.
    pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "normal" => &["sigma"],
            "gamma" | "beta" | "pearson4" | "inverse_gamma" => &["r", "s"],
            "chi2" | "student_t" => &["v"],
            "exponential" => &["lambda"],
            "uniform" => &["u"],
            "pareto" => &["c", "l"],
            "laplace" => &["c"],
            "lognormal" => &["delta", "sigma"],
            _ => return Err(Error::UnknownLaw(name.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParams(format!("unknown parameter '{k}' for {name}")));
        }
        if params.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        let p = |k, d| param(params, k, d);
        let kind = match name {
            "normal" => LawKind::Normal { sigma: p("sigma", 1.0) },
            "gamma" => LawKind::Gamma { r: p("r", 2.0), s: p("s", 1.0) },
            "chi2" => LawKind::Chi2 { v: p("v", 1.0) },
            "exponential" => LawKind::Exponential { lambda: p("lambda", 1.0) },
            "beta" => LawKind::Beta { r: p("r", 2.0), s: p("s", 3.0) },
            "pearson4" => LawKind::PearsonIv { r: p("r", 2.5), s: p("s", 1.0) },
            "student_t" => LawKind::StudentT { v: p("v", 5.0) },
            "inverse_gamma" => LawKind::InverseGamma { r: p("r", 6.0), s: p("s", 1.0) },
            "uniform" => LawKind::Uniform { u: p("u", 1.0) },
            "pareto" => LawKind::Pareto { c: p("c", 5.0), l: p("l", -1.0) },
            "laplace" => LawKind::Laplace { c: p("c", 1.0) },
            _ => LawKind::Lognormal { delta: p("delta", 0.0), sigma: p("sigma", 0.5) },
        };
        Self::new(kind)
    }

    /// Builds a law from a `{name, params}` record.
    pub fn from_spec(spec: &LawSpec) -> Result<Self> {
        Self::catalog(&spec.name, &spec.params)
    }

    /// Builds a law from its kind, validating parameters.
    pub fn new(kind: LawKind) -> Result<Self> {
        use LawKind::*;
        let support = match kind {
            Normal { sigma } => {
                require(sigma > 0.0, "normal: sigma > 0")?;
                Support::REAL_LINE
            }
            Gamma { r, s } => {
                require(r > 0.0 && s > 0.0, "gamma: r > 0, s > 0")?;
                Support { l: -r * s, u: f64::INFINITY }
            }
            Chi2 { v } => {
                require(v > 0.0, "chi2: v > 0")?;
                Support { l: -v, u: f64::INFINITY }
            }
            Exponential { lambda } => {
                require(lambda > 0.0, "exponential: lambda > 0")?;
                Support { l: -1.0 / lambda, u: f64::INFINITY }
            }
            Beta { r, s } => {
                require(r > 0.0 && s > 0.0, "beta: r > 0, s > 0")?;
                let l = -r / (r + s);
                Support { l, u: 1.0 + l }
            }
            PearsonIv { r, .. } => {
                require(r > 1.5, "pearson4: r > 3/2")?;
                Support::REAL_LINE
            }
            StudentT { v } => {
                require(v > 2.0, "student_t: v > 2")?;
                Support::REAL_LINE
            }
            InverseGamma { r, s } => {
                require(r > 3.0 && s > 0.0, "inverse_gamma: r > 3, s > 0")?;
                Support { l: -s / (r - 2.0), u: f64::INFINITY }
            }
            Uniform { u } => {
                require(u > 0.0, "uniform: u > 0")?;
                Support { l: -u, u }
            }
            Pareto { c, l } => {
                require(c > 2.0 && l < 0.0, "pareto: c > 2, l < 0")?;
                Support { l, u: f64::INFINITY }
            }
            Laplace { c } => {
                require(c > 0.0, "laplace: c > 0")?;
                Support::REAL_LINE
            }
            Lognormal { delta, sigma } => {
                require(sigma > 0.0, "lognormal: sigma > 0")?;
                Support { l: -(delta + 0.5 * sigma * sigma).exp(), u: f64::INFINITY }
            }
        };
        let mut law = ReferenceLaw { kind, support, log_norm: 0.0, abs_mean: f64::NAN, sd: f64::NAN };
        if let PearsonIv { r, s } = kind {
            // x = tan(theta) turns the normaliser into a smooth finite integral
            let total = integrate_scaled(
                |t: f64| ((2.0 * r - 2.0) * t.cos().ln() + s * t).exp(),
                -FRAC_PI_2,
                FRAC_PI_2,
                1.0,
                Tolerance::default(),
            )?;
            law.log_norm = -total.ln();
        }
        law.sd = law.second_moment().sqrt();
        law.abs_mean = law.abs_mean_by_quadrature()?;
        Ok(law)
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        use LawKind::*;
        match self.kind {
            Normal { .. } => "normal",
            Gamma { .. } => "gamma",
            Chi2 { .. } => "chi2",
            Exponential { .. } => "exponential",
            Beta { .. } => "beta",
            PearsonIv { .. } => "pearson4",
            StudentT { .. } => "student_t",
            InverseGamma { .. } => "inverse_gamma",
            Uniform { .. } => "uniform",
            Pareto { .. } => "pareto",
            Laplace { .. } => "laplace",
            Lognormal { .. } => "lognormal",
        }
    }

    /// `{name, params}` record that rebuilds this law.
    pub fn spec(&self) -> LawSpec {
        use LawKind::*;
        let pairs: Vec<(&str, f64)> = match self.kind {
            Normal { sigma } => vec![("sigma", sigma)],
            Gamma { r, s } | Beta { r, s } | PearsonIv { r, s } | InverseGamma { r, s } => vec![("r", r), ("s", s)],
            Chi2 { v } | StudentT { v } => vec![("v", v)],
            Exponential { lambda } => vec![("lambda", lambda)],
            Uniform { u } => vec![("u", u)],
            Pareto { c, l } => vec![("c", c), ("l", l)],
            Laplace { c } => vec![("c", c)],
            Lognormal { delta, sigma } => vec![("delta", delta), ("sigma", sigma)],
        };
        LawSpec {
            name: self.name().to_string(),
            params: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// `E|Z|`, computed once by quadrature.
    pub fn abs_mean(&self) -> f64 {
        self.abs_mean
    }

    /// Standard deviation in closed form.
    pub fn std_dev(&self) -> f64 {
        self.sd
    }

    /// Quadratic coefficients `g*(z) = alpha z^2 + beta z + gamma` for the
    /// Pearson members of the catalog.
    pub fn pearson(&self) -> Option<PearsonParams> {
        use LawKind::*;
        let (a, b, g) = match self.kind {
            Normal { sigma } => (0.0, 0.0, sigma * sigma),
            Gamma { r, s } => (0.0, s, r * s * s),
            Chi2 { v } => (0.0, 2.0, 2.0 * v),
            Exponential { lambda } => (0.0, 1.0 / lambda, 1.0 / (lambda * lambda)),
            Beta { r, s } => {
                let (l, u) = (self.support.l, self.support.u);
                (-1.0 / (r + s), (u + l) / (r + s), -l * u / (r + s))
            }
            PearsonIv { r, s } => {
                let a = 1.0 / (2.0 * (r - 1.0));
                let t = -s / (2.0 * (r - 1.0));
                (a, -2.0 * t * a, (1.0 + t * t) * a)
            }
            StudentT { v } => (1.0 / (v - 1.0), 0.0, v / (v - 1.0)),
            InverseGamma { r, .. } => {
                let l = self.support.l;
                (1.0 / (r - 2.0), -2.0 * l / (r - 2.0), l * l / (r - 2.0))
            }
            Uniform { u } => (-0.5, 0.0, 0.5 * u * u),
            Pareto { c, l } => (1.0 / (c - 1.0), -(1.0 + c) * l / (c - 1.0), c * l * l / (c - 1.0)),
            Laplace { .. } | Lognormal { .. } => return None,
        };
        Some(PearsonParams { alpha: a, beta: b, gamma: g })
    }

    fn second_moment(&self) -> f64 {
        match self.kind {
            LawKind::Laplace { c } => 2.0 / (c * c),
            LawKind::Lognormal { delta, sigma } => {
                let s2 = sigma * sigma;
                (s2.exp() - 1.0) * (2.0 * delta + s2).exp()
            }
            _ => {
                let p = self.pearson().expect("pearson law");
                p.gamma / (1.0 - p.alpha)
            }
        }
    }

    fn abs_mean_by_quadrature(&self) -> Result<f64> {
        let f = |z: f64| z.abs() * self.density(z);
        let s = self.sd;
        let soft = self.soft_endpoints();
        let left = integrate_sqrt_endpoints(f, self.support.l, 0.0, (soft.0, false), s, Tolerance::default())?;
        let right = integrate_sqrt_endpoints(f, 0.0, self.support.u, (false, soft.1), s, Tolerance::default())?;
        Ok(left + right)
    }

    /// Which finite endpoints may carry an integrable density singularity.
    pub fn soft_endpoints(&self) -> (bool, bool) {
        (self.support.l.is_finite(), self.support.u.is_finite())
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn ln_density(&self, z: f64) -> f64 {
        use LawKind::*;
        if !self.support.contains(z) {
            return f64::NEG_INFINITY;
        }
        let w = z - self.support.l;
        match self.kind {
            Normal { sigma } => -0.5 * (z / sigma).powi(2) - (sigma * (2.0 * PI).sqrt()).ln(),
            Gamma { r, s } => (r - 1.0) * w.ln() - w / s - r * s.ln() - ln_gamma(r),
            Chi2 { v } => {
                let r = 0.5 * v;
                (r - 1.0) * w.ln() - 0.5 * w - r * 2f64.ln() - ln_gamma(r)
            }
            Exponential { lambda } => lambda.ln() - lambda * w,
            Beta { r, s } => (r - 1.0) * w.ln() + (s - 1.0) * (1.0 - w).ln() - ln_beta(r, s),
            PearsonIv { r, s } => {
                let x = z + s / (2.0 * (r - 1.0));
                self.log_norm - r * (x * x).ln_1p() + s * x.atan()
            }
            StudentT { v } => {
                ln_gamma(0.5 * (v + 1.0)) - ln_gamma(0.5 * v) - 0.5 * (v * PI).ln() - 0.5 * (v + 1.0) * (z * z / v).ln_1p()
            }
            InverseGamma { r, s } => (r - 1.0) * s.ln() - ln_gamma(r - 1.0) - r * w.ln() - s / w,
            Uniform { u } => -(2.0 * u).ln(),
            Pareto { c, l } => {
                let y = z - c * l;
                c.ln() + c * (-l).ln() + c * (c - 1.0).ln() - (c + 1.0) * y.ln()
            }
            Laplace { c } => (0.5 * c).ln() - c * z.abs(),
            Lognormal { delta, sigma } => {
                let p = (w.ln() - delta) / sigma;
                (-self.support.l).ln() - 0.5 * (2.0 * PI).ln() - sigma.ln() - 2.0 * delta - 0.5 * (p + sigma).powi(2)
            }
        }
    }

    /// Density `rho(z)`, zero outside the support.
    pub fn density(&self, z: f64) -> f64 {
        if !self.support.contains(z) {
            return 0.0;
        }
        self.ln_density(z).exp()
    }

    /// `rho'(z) / rho(z)` inside the support.
    pub fn dlog_density(&self, z: f64) -> f64 {
        use LawKind::*;
        let w = z - self.support.l;
        match self.kind {
            Normal { sigma } => -z / (sigma * sigma),
            Gamma { r, s } => (r - 1.0) / w - 1.0 / s,
            Chi2 { v } => (0.5 * v - 1.0) / w - 0.5,
            Exponential { lambda } => -lambda,
            Beta { r, s } => (r - 1.0) / w - (s - 1.0) / (1.0 - w),
            PearsonIv { r, s } => {
                let x = z + s / (2.0 * (r - 1.0));
                (s - 2.0 * r * x) / (1.0 + x * x)
            }
            StudentT { v } => -(v + 1.0) * z / (v + z * z),
            InverseGamma { r, s } => -r / w + s / (w * w),
            Uniform { .. } => 0.0,
            Pareto { c, l } => -(c + 1.0) / (z - c * l),
            Laplace { c } => -c * z.signum(),
            Lognormal { delta, sigma } => {
                let p = (w.ln() - delta) / sigma;
                -(p + sigma) / (sigma * w)
            }
        }
    }

    /// Second derivative of `ln rho` inside the support.
    pub fn d2log_density(&self, z: f64) -> f64 {
        use LawKind::*;
        let w = z - self.support.l;
        match self.kind {
            Normal { sigma } => -1.0 / (sigma * sigma),
            Gamma { r, .. } => -(r - 1.0) / (w * w),
            Chi2 { v } => -(0.5 * v - 1.0) / (w * w),
            Exponential { .. } | Uniform { .. } | Laplace { .. } => 0.0,
            Beta { r, s } => -(r - 1.0) / (w * w) - (s - 1.0) / ((1.0 - w) * (1.0 - w)),
            PearsonIv { r, s } => {
                let x = z + s / (2.0 * (r - 1.0));
                let q = 1.0 + x * x;
                (-2.0 * r * q - (s - 2.0 * r * x) * 2.0 * x) / (q * q)
            }
            StudentT { v } => -(v + 1.0) * (v - z * z) / ((v + z * z) * (v + z * z)),
            InverseGamma { r, s } => r / (w * w) - 2.0 * s / (w * w * w),
            Pareto { c, l } => (c + 1.0) / (z - c * l).powi(2),
            Lognormal { delta, sigma } => {
                let p = (w.ln() - delta) / sigma;
                -(1.0 - sigma * (p + sigma)) / (sigma * sigma * w * w)
            }
        }
    }

    /// Distribution function `Phi(z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        if z <= self.support.l {
            return 0.0;
        }
        if z >= self.support.u {
            return 1.0;
        }
        self.tail(z, false)
    }

    /// Survival function `1 - Phi(z)`, computed without cancellation.
    pub fn sf(&self, z: f64) -> f64 {
        if z <= self.support.l {
            return 1.0;
        }
        if z >= self.support.u {
            return 0.0;
        }
        self.tail(z, true)
    }

    fn tail(&self, z: f64, upper: bool) -> f64 {
        use LawKind::*;
        let w = z - self.support.l;
        let pick = |lower: f64, up: f64| if upper { up } else { lower };
        match self.kind {
            Normal { sigma } => {
                let x = z / sigma;
                if upper { std_normal_cdf(-x) } else { std_normal_cdf(x) }
            }
            Gamma { r, s } => pick(gamma_lr(r, w / s), gamma_ur(r, w / s)),
            Chi2 { v } => pick(gamma_lr(0.5 * v, 0.5 * w), gamma_ur(0.5 * v, 0.5 * w)),
            Exponential { lambda } => pick(-(-lambda * w).exp_m1(), (-lambda * w).exp()),
            Beta { r, s } => pick(beta_reg(r, s, w), beta_reg(s, r, 1.0 - w)),
            PearsonIv { r, s } => {
                let x = z + s / (2.0 * (r - 1.0));
                let th = x.atan();
                let f = |t: f64| (self.log_norm + (2.0 * r - 2.0) * t.cos().ln() + s * t).exp();
                let tol = Tolerance::new(1e-300, 1e-12);
                let v = if upper {
                    integrate_scaled(f, th, FRAC_PI_2, 1.0, tol)
                } else {
                    integrate_scaled(f, -FRAC_PI_2, th, 1.0, tol)
                };
                v.unwrap_or(f64::NAN).clamp(0.0, 1.0)
            }
            StudentT { v } => {
                // P(T < -|z|) = I_{v/(v+z^2)}(v/2, 1/2) / 2
                let small = 0.5 * beta_reg(0.5 * v, 0.5, v / (v + z * z));
                let big = 1.0 - small;
                match (z < 0.0, upper) {
                    (true, false) | (false, true) => small,
                    _ => big,
                }
            }
            InverseGamma { r, s } => pick(gamma_ur(r - 1.0, s / w), gamma_lr(r - 1.0, s / w)),
            Uniform { u } => pick(w / (2.0 * u), (u - z) / (2.0 * u)),
            Pareto { c, l } => {
                let xm = -l * (c - 1.0);
                let sf = (xm / (z - c * l)).powf(c);
                pick(1.0 - sf, sf)
            }
            Laplace { c } => {
                let small = 0.5 * (-c * z.abs()).exp();
                match (z < 0.0, upper) {
                    (true, false) | (false, true) => small,
                    _ => 1.0 - small,
                }
            }
            Lognormal { delta, sigma } => {
                let p = (w.ln() - delta) / sigma;
                if upper { std_normal_cdf(-p) } else { std_normal_cdf(p) }
            }
        }
    }

    /// Quantile by bisection on the distribution function.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let mut lo = if self.support.l.is_finite() { self.support.l } else { -self.sd };
        let mut hi = if self.support.u.is_finite() { self.support.u } else { self.sd };
        while !self.support.l.is_finite() && self.cdf(lo) > p && lo > -1e300 {
            lo *= 2.0;
        }
        while !self.support.u.is_finite() && self.cdf(hi) < p && hi < 1e300 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            // compare tails on the side where they are resolved accurately
            let below = if p < 0.5 { self.cdf(mid) < p } else { self.sf(mid) > 1.0 - p };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Closed-form Stein factor; zero outside the support.
    pub fn gstar(&self, z: f64) -> f64 {
        use LawKind::*;
        if !self.support.contains(z) {
            return 0.0;
        }
        let l = self.support.l;
        let w = z - l;
        match self.kind {
            Normal { sigma } => sigma * sigma,
            Gamma { s, .. } => s * w,
            Chi2 { .. } => 2.0 * w,
            Exponential { lambda } => w / lambda,
            Beta { r, s } => w * (self.support.u - z) / (r + s),
            PearsonIv { r, s } => {
                let x = z + s / (2.0 * (r - 1.0));
                (1.0 + x * x) / (2.0 * (r - 1.0))
            }
            StudentT { v } => v / (v - 1.0) * (1.0 + z * z / v),
            InverseGamma { r, .. } => w * w / (r - 2.0),
            Uniform { u } => 0.5 * (u * u - z * z),
            Pareto { c, l } => w * (z - c * l) / (c - 1.0),
            Laplace { c } => (1.0 + c * z.abs()) / (c * c),
            Lognormal { delta, sigma } => {
                let p = (w.ln() - delta) / sigma;
                let ln_int = ln_gauss_integral(p - sigma, p);
                sigma * (2.0 * delta + 0.5 * (p + sigma).powi(2) + ln_int).exp()
            }
        }
    }

    /// `d g*/dz`; one-sided (right) at the Laplace kink.
    pub fn gstar_prime(&self, z: f64) -> f64 {
        if let Some(p) = self.pearson() {
            return 2.0 * p.alpha * z + p.beta;
        }
        match self.kind {
            LawKind::Laplace { c } => if z < 0.0 { -1.0 / c } else { 1.0 / c },
            _ => -z - self.gstar(z) * self.dlog_density(z),
        }
    }

    /// `d^2 g*/dz^2` (zero almost everywhere for Laplace).
    pub fn gstar_second(&self, z: f64) -> f64 {
        if let Some(p) = self.pearson() {
            return 2.0 * p.alpha;
        }
        match self.kind {
            LawKind::Laplace { .. } => 0.0,
            _ => {
                let g = self.gstar(z);
                -1.0 - self.gstar_prime(z) * self.dlog_density(z) - g * self.d2log_density(z)
            }
        }
    }

    /// Antiderivative of `g*`: `G*(l) = 0` for a finite lower end, else
    /// `G*(0) = 0`. Only differences of `G*` and `E[Z G*(Z)]` enter the
    /// bounds, and the latter is insensitive to the additive constant.
    pub fn big_gstar(&self, z: f64) -> f64 {
        let l = self.support.l;
        if let Some(p) = self.pearson() {
            let z = z.min(self.support.u);
            let prim = |x: f64| p.alpha * x * x * x / 3.0 + 0.5 * p.beta * x * x + p.gamma * x;
            if l.is_finite() {
                if z <= l {
                    return 0.0;
                }
                return prim(z) - prim(l);
            }
            return prim(z);
        }
        match self.kind {
            LawKind::Laplace { c } => (z + 0.5 * c * z * z.abs()) / (c * c),
            _ => {
                if z <= l {
                    return 0.0;
                }
                integrate_sqrt_endpoints(|y| self.gstar(y), l, z, (true, false), self.sd, Tolerance::default())
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// Equally spaced interior evaluation grid of `n` points.
    ///
    /// Finite ends are pulled in by `1e-4` of the support width (of the
    /// standard deviation for half-lines). Every end also stops at the
    /// `1e-10` tail quantile, and infinite ends at 50 standard deviations,
    /// so the density never underflows.
    pub fn interior_grid(&self, n: usize) -> Vec<f64> {
        let (a, b) = self.interior_window();
        if n == 1 {
            return vec![0.5 * (a + b)];
        }
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    /// End points of [`Self::interior_grid`].
    pub fn interior_window(&self) -> (f64, f64) {
        let Support { l, u } = self.support;
        let width = if l.is_finite() && u.is_finite() { u - l } else { self.sd };
        let qa = self.quantile(1e-10);
        let qb = self.quantile(1.0 - 1e-10);
        let a = if l.is_finite() { qa.max(l + 1e-4 * width) } else { qa.max(-50.0 * self.sd) };
        let b = if u.is_finite() { qb.min(u - 1e-4 * width) } else { qb.min(50.0 * self.sd) };
        (a, b)
    }
}

/// `ln int_x^inf exp(-s^2/2) ds`, using the Mills-ratio continued fraction
/// in the far tail where `erfc` underflows.
fn ln_upper_gauss(x: f64) -> f64 {
    if x < 5.0 {
        return ((PI / 2.0).sqrt() * erfc(x / SQRT_2)).ln();
    }
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))) by backward recurrence
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + k as f64 / t;
    }
    -0.5 * x * x - t.ln()
}

/// `ln int_a^b exp(-s^2/2) ds` for `a < b`, stable in both tails.
fn ln_gauss_integral(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a >= 0.0 {
        (a, b)
    } else if b <= 0.0 {
        (-b, -a)
    } else {
        let c = (PI / 2.0).sqrt();
        return (c * (2.0 - erfc(-a / SQRT_2) - erfc(b / SQRT_2))).ln();
    };
    let ul = ln_upper_gauss(lo);
    let uh = ln_upper_gauss(hi);
    ul + (-(uh - ul).exp()).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_laws() -> Vec<ReferenceLaw> {
        CATALOG_NAMES.iter().map(|n| ReferenceLaw::catalog(n, &BTreeMap::new()).unwrap()).collect()
    }

    fn law(name: &str, kv: &[(&str, f64)]) -> ReferenceLaw {
        let p = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        ReferenceLaw::catalog(name, &p).unwrap()
    }

    #[test]
    fn exponential_gstar_matches_worked_value() {
        let e = law("exponential", &[("lambda", 1.0)]);
        assert_eq!(e.support().l, -1.0);
        assert!((e.gstar(0.37) - 1.37).abs() < 1e-15);
    }

    #[test]
    fn every_density_integrates_to_one_with_mean_zero() {
        for law in all_laws() {
            let Support { l, u } = law.support();
            let soft = law.soft_endpoints();
            let s = law.std_dev();
            let tol = Tolerance::default();
            let mass = integrate_sqrt_endpoints(|z| law.density(z), l, u, soft, s, tol).unwrap();
            let mean = integrate_sqrt_endpoints(|z| z * law.density(z), l, u, soft, s, tol).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "{} mass {mass}", law.name());
            assert!(mean.abs() < 1e-9 * s.max(1.0), "{} mean {mean}", law.name());
        }
    }

    #[test]
    fn abs_mean_equals_twice_gstar_rho_at_zero() {
        // phi(0) = int_0^u y rho = E|Z|/2 and g*(0) rho(0) = phi(0)
        for law in all_laws() {
            let closed = 2.0 * law.gstar(0.0) * law.density(0.0);
            assert!((law.abs_mean() - closed).abs() < 1e-9, "{}", law.name());
        }
    }

    #[test]
    fn cdf_and_sf_are_complementary_and_match_density() {
        for law in all_laws() {
            for &z in law.interior_grid(7).iter() {
                let (c, s) = (law.cdf(z), law.sf(z));
                assert!((c + s - 1.0).abs() < 1e-12, "{} at {z}", law.name());
                let Support { l, u } = law.support();
                if matches!(law.kind(), LawKind::Laplace { .. }) && z.abs() < 1e-2 {
                    continue;
                }
                let h = 1e-5 * law.std_dev().min(z - l).min(u - z);
                let fd = (law.cdf(z + h) - law.cdf(z - h)) / (2.0 * h);
                assert!((fd - law.density(z)).abs() < 1e-6 * (1.0 + law.density(z)), "{} at {z}", law.name());
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for law in all_laws() {
            for &z in law.interior_grid(9).iter().skip(1).take(7) {
                if matches!(law.kind(), LawKind::Laplace { .. }) && z.abs() < 1e-3 {
                    continue;
                }
                let h = 1e-5 * law.std_dev();
                let d1 = (law.gstar(z + h) - law.gstar(z - h)) / (2.0 * h);
                let d2 = (law.gstar_prime(z + h) - law.gstar_prime(z - h)) / (2.0 * h);
                let sc = 1.0 + law.gstar(z).abs();
                assert!((d1 - law.gstar_prime(z)).abs() < 1e-5 * sc, "{} g' at {z}", law.name());
                assert!((d2 - law.gstar_second(z)).abs() < 1e-4 * sc, "{} g'' at {z}", law.name());
            }
        }
    }

    #[test]
    fn stein_identity_g_rho_prime_is_minus_z_rho() {
        // (g* rho)' = -z rho is the defining ODE of the closed forms
        for law in all_laws() {
            for &z in law.interior_grid(11).iter().skip(1).take(9) {
                let lhs = (law.gstar_prime(z) + law.gstar(z) * law.dlog_density(z)) * law.density(z);
                let rhs = -z * law.density(z);
                assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{} at {z}", law.name());
            }
        }
    }

    #[test]
    fn big_gstar_differentiates_to_gstar() {
        for law in all_laws() {
            let z = 0.3 * law.std_dev();
            let h = 1e-4 * law.std_dev();
            let d = (law.big_gstar(z + h) - law.big_gstar(z - h)) / (2.0 * h);
            assert!((d - law.gstar(z)).abs() < 1e-6 * (1.0 + law.gstar(z)), "{}", law.name());
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for law in all_laws() {
            for p in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
                let q = law.quantile(p);
                assert!((law.cdf(q) - p).abs() < 1e-9, "{} p={p}", law.name());
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(
            ReferenceLaw::catalog("student_t", &[("v".to_string(), 2.0)].into()),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(ReferenceLaw::catalog("cauchy", &BTreeMap::new()), Err(Error::UnknownLaw(_))));
        assert!(matches!(
            ReferenceLaw::catalog("normal", &[("mu".to_string(), 0.0)].into()),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn gauss_tail_integral_is_continuous_across_switch() {
        for (a, b) in [(4.9999, 5.5), (5.0001, 5.5), (6.0, 6.5), (-6.5, -6.0), (-0.5, 0.7)] {
            let direct = integrate_scaled(|s: f64| (-0.5 * s * s).exp(), a, b, 1.0, Tolerance::default()).unwrap();
            assert!((ln_gauss_integral(a, b) - direct.ln()).abs() < 1e-10, "({a}, {b})");
        }
        // deep tail stays finite
        assert!(ln_gauss_integral(-40.5, -40.0).is_finite());
    }

    #[test]
    fn spec_round_trip() {
        for law in all_laws() {
            let again = ReferenceLaw::from_spec(&law.spec()).unwrap();
            assert_eq!(again.kind(), law.kind());
        }
    }
}
