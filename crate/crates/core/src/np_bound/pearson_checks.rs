use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reference_laws::{pearson_gz_stats, pearson_moment, PearsonParams};
use crate::stats::Estimate;

/// Moment estimates of `X_n` at one rung.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PearsonRow {
    pub n: usize,
    pub m2: Estimate,
    pub m3: Estimate,
    pub m4: Estimate,
    /// `Var g_{X_n}`
    pub var_g: Estimate,
}

/// Verdict on one limit along a ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentTarget {
    pub quantity: String,
    pub target: f64,
    pub terminal: Estimate,
    /// terminal estimate within `k_sigma` standard errors plus `slack`
    pub within: bool,
    /// distance to target never grows by more than two combined errors
    pub approaching: bool,
}

fn judge(quantity: &str, target: f64, path: &[Estimate], k_sigma: f64, slack: f64) -> MomentTarget {
    let last = *path.last().expect("nonempty ladder");
    let gaps: Vec<Estimate> = path.iter().map(|e| Estimate { value: (e.value - target).abs(), stderr: e.stderr }).collect();
    MomentTarget {
        quantity: quantity.to_string(),
        target,
        terminal: last,
        within: last.covers(target, k_sigma, slack),
        approaching: crate::stats::nonincreasing_within(&gaps, 2.0),
    }
}

/// Checks the sufficient conditions for `X_n -> Z` with `Z` Pearson.
///
/// The variance target `gamma / (1 - alpha)` is always checked first, then
/// the conditions of the matching case (normal, gamma, general `alpha`).
pub fn pearson_convergence_check(p: &PearsonParams, rows: &[PearsonRow], k_sigma: f64, slack: f64) -> Result<Vec<MomentTarget>> {
    if rows.is_empty() {
        return Err(Error::InvalidParams("empty ladder".into()));
    }
    let col = |f: fn(&PearsonRow) -> Estimate| rows.iter().map(f).collect::<Vec<_>>();
    let mut out = vec![judge("E[X^2]", p.gamma / (1.0 - p.alpha), &col(|r| r.m2), k_sigma, slack)];
    let var_g = pearson_gz_stats(p)?.var_g;
    out.push(judge("Var g_X", var_g, &col(|r| r.var_g), k_sigma, slack));
    if p.alpha == 0.0 && p.beta == 0.0 {
        return Ok(out);
    }
    out.push(judge("E[X^3]", pearson_moment(p, 3)?, &col(|r| r.m3), k_sigma, slack));
    if p.alpha != 0.0 {
        out.push(judge("E[X^4]", pearson_moment(p, 4)?, &col(|r| r.m4), k_sigma, slack));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialVerdict {
    /// degree of `g*`
    pub m: usize,
    /// `max(2m, m + 2)`
    pub needed: usize,
    pub rows: Vec<MomentTarget>,
    pub passed: bool,
}

/// Moment matching `E[X^k] -> E[Z^k]` for `k = 1..max(2m, m+2)` when `g*`
/// is a polynomial of degree `m`.
///
/// `sample_moments[k-1]` and `z_moments[k-1]` hold the `k`-th moments.
///
/// # Errors
/// [`Error::MomentUndefined`] when fewer moments than needed are supplied.
pub fn polynomial_gstar_check(coeffs: &[f64], sample_moments: &[Estimate], z_moments: &[f64], k_sigma: f64, slack: f64) -> Result<PolynomialVerdict> {
    let m = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
    let needed = (2 * m).max(m + 2);
    let have = sample_moments.len().min(z_moments.len());
    if have < needed {
        return Err(Error::MomentUndefined { order: needed as u32, k: have as u32 });
    }
    let rows: Vec<MomentTarget> = (0..needed)
        .map(|i| judge(&format!("E[X^{}]", i + 1), z_moments[i], &sample_moments[i..=i], k_sigma, slack))
        .collect();
    let passed = rows.iter().all(|r| r.within);
    Ok(PolynomialVerdict { m, needed, rows, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_orders() {
        let e = |v: f64| Estimate { value: v, stderr: 0.01 };
        let normal = polynomial_gstar_check(&[1.0], &[e(0.0), e(1.0)], &[0.0, 1.0], 3.0, 0.0).unwrap();
        assert_eq!(normal.needed, 2);
        assert!(normal.passed);
        let gamma = polynomial_gstar_check(&[2.0, 1.0], &[e(0.0), e(2.0), e(4.0)], &[0.0, 2.0, 4.0], 3.0, 0.0).unwrap();
        assert_eq!(gamma.needed, 3);
        let full = PearsonParams { alpha: 0.1, beta: 0.5, gamma: 1.0 };
        let zm: Vec<f64> = (1..=4).map(|k| pearson_moment(&full, k).unwrap()).collect();
        let v = polynomial_gstar_check(&[1.0, 0.5, 0.1], &zm.iter().map(|&v| e(v)).collect::<Vec<_>>(), &zm, 3.0, 0.0).unwrap();
        assert_eq!(v.needed, 4);
        assert!(matches!(polynomial_gstar_check(&[1.0, 0.5, 0.1], &[e(0.0)], &zm, 3.0, 0.0), Err(Error::MomentUndefined { .. })));
    }

    #[test]
    fn chi_square_targets() {
        let p = PearsonParams { alpha: 0.0, beta: 2.0, gamma: 2.0 };
        let exact = |v: f64| Estimate::exact(v);
        let rows = [PearsonRow { n: 1, m2: exact(2.0), m3: exact(8.0), m4: exact(60.0), var_g: exact(8.0) }];
        let v = pearson_convergence_check(&p, &rows, 3.0, 1e-12).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|t| t.within), "{v:?}");
    }
}
