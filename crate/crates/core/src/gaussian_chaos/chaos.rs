use std::collections::BTreeMap;
use std::sync::Arc;

use super::contraction::contract_ws;
use super::index::{binom, factorial, rank_union, MultisetIndex};
use super::kernel::{GridMeasure, SymmetricKernel};
use crate::error::{Error, Result};

/// Finite chaos expansion `F = sum_q I_q(f_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosVector {
    grid: Arc<GridMeasure>,
    kernels: BTreeMap<usize, SymmetricKernel>,
}

impl ChaosVector {
    pub fn zero(grid: &Arc<GridMeasure>) -> Self {
        Self { grid: grid.clone(), kernels: BTreeMap::new() }
    }

    pub fn constant(grid: &Arc<GridMeasure>, c: f64) -> Self {
        let mut v = Self::zero(grid);
        v.kernels.insert(0, SymmetricKernel::scalar(grid, c));
        v
    }

    pub fn single(f: SymmetricKernel) -> Self {
        let mut v = Self::zero(f.grid());
        v.kernels.insert(f.order(), f);
        v
    }

    pub fn grid(&self) -> &Arc<GridMeasure> {
        &self.grid
    }

    pub fn kernels(&self) -> &BTreeMap<usize, SymmetricKernel> {
        &self.kernels
    }

    pub fn kernel(&self, q: usize) -> Option<&SymmetricKernel> {
        self.kernels.get(&q)
    }

    /// Adds `c * I_q(f)`.
    pub fn add_kernel(&mut self, f: &SymmetricKernel, c: f64) -> Result<()> {
        match self.kernels.get_mut(&f.order()) {
            Some(k) => k.add_assign(f, c)?,
            None => {
                self.kernels.insert(f.order(), f.scaled(c));
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        for k in other.kernels.values() {
            out.add_kernel(k, c)?;
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), kernels: self.kernels.iter().map(|(&q, k)| (q, k.scaled(c))).collect() }
    }

    /// `E[F]`.
    pub fn mean(&self) -> f64 {
        self.kernels.get(&0).map_or(0.0, |k| k.coeffs()[0])
    }

    /// `E[F^2] = sum_q q! ||f_q||^2`.
    pub fn second_moment(&self) -> f64 {
        self.kernels.iter().map(|(&q, k)| factorial(q) * k.norm_sq()).sum()
    }

    pub fn variance(&self) -> f64 {
        self.kernels.iter().filter(|(&q, _)| q > 0).map(|(&q, k)| factorial(q) * k.norm_sq()).sum()
    }

    /// `E[F G]` by the isometry.
    pub fn covariance_with(&self, other: &Self) -> Result<f64> {
        let mut s = 0.0;
        for (q, k) in &self.kernels {
            if let Some(o) = other.kernels.get(q) {
                s += factorial(*q) * k.inner(o)?;
            }
        }
        Ok(s)
    }

    pub fn max_order(&self) -> usize {
        self.kernels.keys().next_back().copied().unwrap_or(0)
    }

    /// The order `q` when `F` lives in a single nonconstant chaos.
    pub fn single_order(&self) -> Option<usize> {
        let mut live = self.kernels.iter().filter(|(_, k)| !k.is_zero());
        match (live.next(), live.next()) {
            (Some((&q, _)), None) if q > 0 => Some(q),
            _ => None,
        }
    }

    /// The product `F G` expanded back into chaos.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let mut out = Self::zero(&self.grid);
        for f in self.kernels.values() {
            for g in other.kernels.values() {
                if f.is_zero() || g.is_zero() {
                    continue;
                }
                out = out.add(&product_expand(f, g)?, 1.0)?;
            }
        }
        Ok(out)
    }

    /// Maximum absolute coefficient difference, for structural comparisons.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d = 0.0f64;
        let orders: std::collections::BTreeSet<usize> = self.kernels.keys().chain(other.kernels.keys()).copied().collect();
        for q in orders {
            match (self.kernels.get(&q), other.kernels.get(&q)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                        d = d.max((x - y).abs());
                    }
                }
                (Some(k), None) | (None, Some(k)) => d = d.max(k.coeffs().iter().fold(0.0, |m, v| m.max(v.abs()))),
                (None, None) => {}
            }
        }
        d
    }
}

/// `I_p(f) I_q(g)` as a chaos expansion.
///
/// Every term `r! s! C(p,r) C(q,r) C(p-r,s) C(q-r,s) I(f (x)_r^s g)` is
/// included; `s > 0` terms only appear on grids with jump cells, so on a
/// Gaussian grid this is the Wiener product formula.
pub fn product_expand(f: &SymmetricKernel, g: &SymmetricKernel) -> Result<ChaosVector> {
    let (p, q) = (f.order(), g.order());
    let jumps = f.grid().has_jumps();
    let mut out = ChaosVector::zero(f.grid());
    for r in 0..=p.min(q) {
        let smax = if jumps { p.min(q) - r } else { 0 };
        for s in 0..=smax {
            let c = factorial(r) * factorial(s) * (binom(p, r) * binom(q, r) * binom(p - r, s) * binom(q - r, s)) as f64;
            let k = contract_ws(f, g, r, s)?.symmetrize()?;
            out.add_kernel(&k, c)?;
        }
    }
    Ok(out)
}

/// `D_r F = sum_q q I_{q-1}(f_q(r, .))`, one chaos vector per cell `r`.
pub fn malliavin_d(f: &ChaosVector) -> Result<Vec<ChaosVector>> {
    let grid = f.grid().clone();
    let n = grid.len();
    let mut out = vec![ChaosVector::zero(&grid); n];
    let mut buf = Vec::new();
    for (&q, k) in f.kernels() {
        if q == 0 || k.is_zero() {
            continue;
        }
        let idx = MultisetIndex::new(n, q - 1);
        for (r, dr) in out.iter_mut().enumerate() {
            let cell = [r as u16];
            let coeffs = idx.iter().map(|t| q as f64 * k.coeffs()[rank_union(&[&cell, t], &mut buf)]).collect();
            let kr = SymmetricKernel::from_coeffs(&grid, q - 1, coeffs)?;
            if !kr.is_zero() {
                dr.add_kernel(&kr, 1.0)?;
            }
        }
    }
    Ok(out)
}

/// `<U, V>_mu = sum_r mu_r U_r V_r` for two derivative fields.
pub fn inner_field(u: &[ChaosVector], v: &[ChaosVector]) -> Result<ChaosVector> {
    let grid = u.first().map(|c| c.grid().clone()).ok_or_else(|| Error::InvalidParams("empty field".into()))?;
    if u.len() != v.len() || u.len() != grid.len() {
        return Err(Error::InvalidParams("field length does not match the grid".into()));
    }
    let mut out = ChaosVector::zero(&grid);
    for (r, (a, b)) in u.iter().zip(v).enumerate() {
        out = out.add(&a.mul(b)?, grid.masses[r])?;
    }
    Ok(out)
}

/// The Ornstein-Uhlenbeck generator `L F = -sum_q q I_q(f_q)`.
pub fn generator(f: &ChaosVector) -> ChaosVector {
    ChaosVector {
        grid: f.grid.clone(),
        kernels: f.kernels.iter().map(|(&q, k)| (q, k.scaled(-(q as f64)))).collect(),
    }
}

/// `L^{-1} F = -sum_q (1/q) I_q(f_q)`.
///
/// # Errors
/// [`Error::NonCentered`] when `E[F] != 0`.
pub fn l_inverse(f: &ChaosVector) -> Result<ChaosVector> {
    let m = f.mean();
    if m != 0.0 {
        return Err(Error::NonCentered(m));
    }
    Ok(ChaosVector {
        grid: f.grid.clone(),
        kernels: f.kernels.iter().filter(|(&q, _)| q > 0).map(|(&q, k)| (q, k.scaled(-1.0 / q as f64))).collect(),
    })
}
