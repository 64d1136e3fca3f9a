//! Moments of Pearson laws, whose Stein factor is the quadratic
//! `g*(z) = alpha z^2 + beta z + gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl PearsonParams {
    pub fn gstar(&self, z: f64) -> f64 {
        (self.alpha * z + self.beta) * z + self.gamma
    }
}

/// `E[Z^r]` from `E[Z^{k+1}] = (k beta E[Z^k] + k gamma E[Z^{k-1}]) / (1 - k alpha)`.
///
/// # Errors
/// [`Error::MomentUndefined`] when `1 - k alpha <= 0` for a rank `k < r`
/// used by the recursion.
pub fn pearson_moment(p: &PearsonParams, r: u32) -> Result<f64> {
    let mut prev = 1.0; // E[Z^0]
    let mut cur = 0.0; // E[Z^1]
    if r == 0 {
        return Ok(1.0);
    }
    for k in 1..r {
        let d = 1.0 - k as f64 * p.alpha;
        if d <= 0.0 {
            return Err(Error::MomentUndefined { order: r, k });
        }
        let kf = k as f64;
        let next = (kf * p.beta * cur + kf * p.gamma * prev) / d;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Second-moment statistics of `g_Z = g*(Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GzStats {
    pub e_g2: f64,
    pub var_g: f64,
}

/// Closed forms for `E[g_Z^2]` and `Var g_Z`.
///
/// # Errors
/// [`Error::MomentUndefined`] unless `(1-alpha)(1-2alpha)(1-3alpha) > 0`
/// with each factor positive (the fourth moment must exist).
pub fn pearson_gz_stats(p: &PearsonParams) -> Result<GzStats> {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    for k in 1..=3u32 {
        if 1.0 - k as f64 * a <= 0.0 {
            return Err(Error::MomentUndefined { order: 4, k });
        }
    }
    let d = (1.0 - a) * (1.0 - 2.0 * a) * (1.0 - 3.0 * a);
    let e_g2 = (b * b * g * (1.0 - a) + g * g * (1.0 - 2.0 * a).powi(2)) / d;
    let var_g = (b * b * g * (1.0 - a).powi(2) + 2.0 * a * a * g * g * (1.0 - 2.0 * a))
        / ((1.0 - 2.0 * a) * (1.0 - 3.0 * a) * (1.0 - a).powi(2));
    Ok(GzStats { e_g2, var_g })
}
