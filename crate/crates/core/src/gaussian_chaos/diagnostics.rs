use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chaos::{inner_field, malliavin_d, product_expand, ChaosVector};
use super::contraction::contract;
use super::kernel::{GridMeasure, SymmetricKernel};
use super::sampling::sample_joint;
use crate::error::{Error, Result};
use crate::stats::{mean_of, mean_se, variance_se, Estimate};

/// `||f (x)_r f||` for `r = 1, ..., q - 1`.
pub fn contraction_norms(f: &SymmetricKernel) -> Result<BTreeMap<usize, f64>> {
    (1..f.order()).map(|r| Ok((r, contract(f, f, r)?.norm()))).collect()
}

/// `f_n = (2n)^{-1/2} sum_k e_k (x) e_k` on `n` cells of mass `1/n`, with
/// `e_k` the unit vector of cell `k`.
pub fn block_kernel(n: usize) -> Result<SymmetricKernel> {
    let grid = GridMeasure::uniform(n, 1.0)?;
    block_kernel_on(&grid)
}

/// Same construction on an arbitrary grid.
pub fn block_kernel_on(grid: &Arc<GridMeasure>) -> Result<SymmetricKernel> {
    let c = (2.0 * grid.len() as f64).sqrt().recip();
    SymmetricKernel::from_fn(grid, 2, |t| if t[0] == t[1] { c / grid.masses[t[0] as usize] } else { 0.0 })
}

/// Both sides of `E[F^{r+1}] = (r/q) E[F^{r-1} ||DF||^2]` for `F = I_q(f)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// paired estimate of `lhs - rhs`
    pub diff: Estimate,
}

/// Monte Carlo of the moments formula on a Gaussian grid.
pub fn moment_via_formula(f: &SymmetricKernel, r: u32, n_paths: usize, seed: u64) -> Result<MomentCheck> {
    if r == 0 {
        return Err(Error::InvalidParams("moment index r must be at least 1".into()));
    }
    if f.grid().has_jumps() {
        return Err(Error::InvalidParams("the moments formula here is the Gaussian one".into()));
    }
    let q = f.order() as f64;
    let x = ChaosVector::single(f.clone());
    let d = malliavin_d(&x)?;
    let dn = inner_field(&d, &d)?;
    let cols = sample_joint(&[&x, &dn], n_paths, seed)?;
    let lhs: Vec<f64> = cols[0].iter().map(|v| v.powi(r as i32 + 1)).collect();
    let rhs: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(v, d)| r as f64 / q * v.powi(r as i32 - 1) * d).collect();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(MomentCheck { lhs: mean_se(&lhs), rhs: mean_se(&rhs), diff: mean_se(&diff) })
}

/// Monte Carlo residual of the product formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductResidual {
    pub orders: (usize, usize),
    /// `E[I_p(f) I_q(g) - expansion]`
    pub mean: Estimate,
    /// `E[(I_p(f) I_q(g) - expansion)^2]`
    pub mean_square: Estimate,
    /// `E[I_p(f) I_q(g)]` for scale
    pub product_mean: Estimate,
}

impl ProductResidual {
    /// Both residual moments within `k` standard errors of zero, with an
    /// absolute floor `eps` for rounding.
    pub fn consistent_with_zero(&self, k: f64, eps: f64) -> bool {
        self.mean.covers(0.0, k, eps) && self.mean_square.covers(0.0, k, eps * eps)
    }
}

/// Samples `I_p(f) I_q(g)` and its expansion on shared noise.
pub fn product_formula_residual(f: &SymmetricKernel, g: &SymmetricKernel, n_paths: usize, seed: u64) -> Result<ProductResidual> {
    let a = ChaosVector::single(f.clone());
    let b = ChaosVector::single(g.clone());
    let e = product_expand(f, g)?;
    let cols = sample_joint(&[&a, &b, &e], n_paths, seed)?;
    let prod: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(x, y)| x * y).collect();
    let d: Vec<f64> = prod.iter().zip(&cols[2]).map(|(p, e)| p - e).collect();
    Ok(ProductResidual {
        orders: (f.order(), g.order()),
        mean: mean_se(&d),
        mean_square: mean_of(&d, |v| v * v),
        product_mean: mean_se(&prod),
    })
}

/// One rung of a fourth-moment ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourthMomentRow {
    pub cells: usize,
    pub order: usize,
    /// `q! ||f||^2`
    pub second_moment: f64,
    pub fourth_moment: Estimate,
    /// `E[X^4]` from the chaos expansion of `X^2`
    pub fourth_moment_exact: f64,
    pub contraction_norms: BTreeMap<usize, f64>,
    /// `Var(||DX||^2 / q)`
    pub var_gamma: Estimate,
    pub var_gamma_exact: f64,
    /// `(q - 1) / (3q) (E[X^4] - 3 sigma^4)` at the Monte Carlo fourth moment
    pub bound: Estimate,
}

/// Samples `X` and `||DX||^2 / q` for `X = I_q(f)`.
pub fn sample_gamma_pair(f: &SymmetricKernel, n_paths: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let q = f.order() as f64;
    let x = ChaosVector::single(f.clone());
    let d = malliavin_d(&x)?;
    let y = inner_field(&d, &d)?.scaled(1.0 / q);
    let mut cols = sample_joint(&[&x, &y], n_paths, seed)?;
    let y = cols.pop().unwrap();
    Ok((cols.pop().unwrap(), y))
}

/// One ladder rung from paired samples of `X` and `||DX||^2 / q`.
///
/// # Errors
/// [`Error::AssumptionViolation`] when `q! ||f||^2` is off `sigma2` by more
/// than `1e-8` relative.
pub fn fourth_moment_row(f: &SymmetricKernel, sigma2: f64, xs: &[f64], ys: &[f64]) -> Result<FourthMomentRow> {
    let q = f.order();
    let x = ChaosVector::single(f.clone());
    let m2 = x.second_moment();
    if (m2 - sigma2).abs() > 1e-8 * sigma2 {
        return Err(Error::AssumptionViolation(format!("E[X^2] = {m2}, expected {sigma2}")));
    }
    let d = malliavin_d(&x)?;
    let gamma = inner_field(&d, &d)?.scaled(1.0 / q as f64);
    let m4 = mean_se(&xs.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    let c = (q as f64 - 1.0) / (3.0 * q as f64);
    Ok(FourthMomentRow {
        cells: f.grid().len(),
        order: q,
        second_moment: m2,
        fourth_moment: m4,
        fourth_moment_exact: x.mul(&x)?.second_moment(),
        contraction_norms: contraction_norms(f)?,
        var_gamma: variance_se(ys),
        var_gamma_exact: gamma.variance(),
        bound: Estimate { value: c * (m4.value - 3.0 * sigma2 * sigma2), stderr: c * m4.stderr },
    })
}

/// Conditions of the fourth-moment theorem along a kernel sequence.
pub fn fourth_moment_report(seq: &[SymmetricKernel], sigma2: f64, n_paths: usize, seed: u64) -> Result<Vec<FourthMomentRow>> {
    seq.iter()
        .enumerate()
        .map(|(i, f)| {
            let (xs, ys) = sample_gamma_pair(f, n_paths, crate::rng::derive_seed(seed, i as u64))?;
            fourth_moment_row(f, sigma2, &xs, &ys)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;

    #[test]
    fn product_formula_holds_pathwise_on_mixed_grid() {
        let g = GridMeasure::with_jumps(vec![0.5, 0.7, 0.3], vec![0.0, 0.8, -0.5]).unwrap();
        let mut rng = block_rng(8, 0);
        let f = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let r = product_formula_residual(&f, &h, 5000, 2).unwrap();
        assert!(r.mean_square.value < 1e-20, "{r:?}");
    }

    #[test]
    fn single_atom_contraction_never_vanishes() {
        let g = GridMeasure::new(vec![1.0]).unwrap();
        let e = SymmetricKernel::unit(&g, 0).unwrap();
        let f = SymmetricKernel::tensor_power(&e, 2).unwrap();
        let norms = contraction_norms(&f).unwrap();
        assert!((norms[&1] - 1.0).abs() < 1e-14);
        assert!(contraction_norms(&e).unwrap().is_empty());
    }

    #[test]
    fn block_kernel_contraction_norm_decays_like_inverse_root_n() {
        // f (x)_1 f = (2n mu)^{-1} sum_k 1_k (x) 1_k, whose norm is 1 / (2 sqrt(n))
        for n in [4, 16, 64] {
            let f = block_kernel(n).unwrap();
            let c = contraction_norms(&f).unwrap()[&1];
            assert!((c - 0.5 / (n as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_ladder_quantities() {
        for n in [4usize, 8] {
            let rows = fourth_moment_report(&[block_kernel(n).unwrap()], 1.0, 2000, 1).unwrap();
            let r = &rows[0];
            assert!((r.fourth_moment_exact - 3.0 - 12.0 / n as f64).abs() < 1e-12);
            assert!((r.var_gamma_exact - 2.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_moments_formula() {
        let g = GridMeasure::new(vec![1.0]).unwrap();
        let e = SymmetricKernel::unit(&g, 0).unwrap();
        let f = SymmetricKernel::tensor_power(&e, 2).unwrap();
        let m = moment_via_formula(&f, 2, 50_000, 4).unwrap();
        assert!(m.lhs.covers(8.0, 4.0, 0.0));
        assert!(m.rhs.covers(8.0, 4.0, 0.0));
        let m = moment_via_formula(&e, 3, 50_000, 4).unwrap();
        assert!(m.lhs.covers(3.0, 4.0, 0.0));
        let x2 = mean_se(&sample_gamma_pair(&e, 50_000, 4).unwrap().0.iter().map(|v| v * v).collect::<Vec<_>>());
        assert!((m.rhs.value - 3.0 * x2.value).abs() < 1e-12);
    }
}
