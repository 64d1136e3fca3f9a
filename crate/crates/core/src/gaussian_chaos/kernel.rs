use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::index::{arrangements, multiset_count, next_permutation, rank, MultisetIndex};
use crate::error::{Error, Result};

/// Size limits for kernel storage and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub max_cells: usize,
    pub max_order: usize,
    /// largest number of stored multiset coefficients per kernel
    pub max_entries: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_cells: 64, max_order: 8, max_entries: 1 << 20 }
    }
}

impl Caps {
    /// Limits for kernel storage alone; sampling uses [`Caps::default`].
    pub fn storage() -> Self {
        Self { max_cells: 1024, ..Self::default() }
    }

    pub fn check(&self, n: usize, q: usize) -> Result<()> {
        if n > self.max_cells {
            return Err(Error::CapExceeded(format!("{n} cells > {}", self.max_cells)));
        }
        if q > self.max_order {
            return Err(Error::CapExceeded(format!("order {q} > {}", self.max_order)));
        }
        let len = multiset_count(n, q);
        if len > self.max_entries {
            return Err(Error::CapExceeded(format!("{len} coefficients > {}", self.max_entries)));
        }
        Ok(())
    }
}

/// Cells with masses `mu_i`. A nonzero `jumps[i]` marks a compensated
/// Poisson cell with jump size `x_i`; zero marks a Gaussian cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub masses: Vec<f64>,
    pub jumps: Vec<f64>,
}

impl GridMeasure {
    pub fn new(masses: Vec<f64>) -> Result<Arc<Self>> {
        let jumps = vec![0.0; masses.len()];
        Self::with_jumps(masses, jumps)
    }

    pub fn with_jumps(masses: Vec<f64>, jumps: Vec<f64>) -> Result<Arc<Self>> {
        if masses.is_empty() || masses.len() != jumps.len() {
            return Err(Error::InvalidParams("grid needs at least one cell and one jump entry per cell".into()));
        }
        if masses.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParams("cell masses must be positive and finite".into()));
        }
        if jumps.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("jump sizes must be finite".into()));
        }
        Ok(Arc::new(Self { masses, jumps }))
    }

    /// `n` Gaussian cells of mass `total / n`.
    pub fn uniform(n: usize, total: f64) -> Result<Arc<Self>> {
        Self::new(vec![total / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps.iter().any(|&x| x != 0.0)
    }

    /// `prod mu_i` over the entries of a tuple.
    pub fn weight(&self, tuple: &[u16]) -> f64 {
        tuple.iter().map(|&i| self.masses[i as usize]).product()
    }
}

/// Symmetric function on `cells^q`, one coefficient per multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    grid: Arc<GridMeasure>,
    order: usize,
    coeffs: Vec<f64>,
}

impl SymmetricKernel {
    pub fn zeros(grid: &Arc<GridMeasure>, q: usize) -> Result<Self> {
        Caps::storage().check(grid.len(), q)?;
        Ok(Self { grid: grid.clone(), order: q, coeffs: vec![0.0; multiset_count(grid.len(), q)] })
    }

    pub fn scalar(grid: &Arc<GridMeasure>, c: f64) -> Self {
        Self { grid: grid.clone(), order: 0, coeffs: vec![c] }
    }

    /// Kernel with coefficients `f(sorted tuple)`.
    pub fn from_fn(grid: &Arc<GridMeasure>, q: usize, mut f: impl FnMut(&[u16]) -> f64) -> Result<Self> {
        let mut k = Self::zeros(grid, q)?;
        for (r, t) in MultisetIndex::new(grid.len(), q).iter().enumerate() {
            k.coeffs[r] = f(t);
        }
        Ok(k)
    }

    pub fn from_coeffs(grid: &Arc<GridMeasure>, q: usize, coeffs: Vec<f64>) -> Result<Self> {
        Caps::storage().check(grid.len(), q)?;
        if coeffs.len() != multiset_count(grid.len(), q) {
            return Err(Error::OrderMismatch(format!("{} coefficients for order {q}", coeffs.len())));
        }
        Ok(Self { grid: grid.clone(), order: q, coeffs })
    }

    /// `1_cell / sqrt(mu_cell)`, a unit vector of order one.
    pub fn unit(grid: &Arc<GridMeasure>, cell: usize) -> Result<Self> {
        let s = grid.masses[cell].sqrt();
        Self::from_fn(grid, 1, |t| if t[0] as usize == cell { 1.0 / s } else { 0.0 })
    }

    /// `e^{(x) q}` for an order-one kernel `e`.
    pub fn tensor_power(e: &Self, q: usize) -> Result<Self> {
        if e.order != 1 {
            return Err(Error::OrderMismatch(format!("tensor power of an order-{} kernel", e.order)));
        }
        Self::from_fn(&e.grid, q, |t| t.iter().map(|&i| e.coeffs[i as usize]).product())
    }

    /// Standard normal coefficients on every multiset.
    pub fn random(grid: &Arc<GridMeasure>, q: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::from_fn(grid, q, |_| rng.sample(rand_distr::StandardNormal))
    }

    pub fn grid(&self) -> &Arc<GridMeasure> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Value at a tuple given in any order.
    pub fn get(&self, tuple: &[usize]) -> f64 {
        let mut t: Vec<u16> = tuple.iter().map(|&i| i as u16).collect();
        t.sort_unstable();
        self.coeffs[rank(&t)]
    }

    pub fn at_sorted(&self, sorted: &[u16]) -> f64 {
        self.coeffs[rank(sorted)]
    }

    pub fn index(&self) -> MultisetIndex {
        MultisetIndex::new(self.grid.len(), self.order)
    }

    /// `<f, g>` in `L^2(mu^q)`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        let idx = self.index();
        Ok(idx
            .iter()
            .zip(self.coeffs.iter().zip(&other.coeffs))
            .map(|(t, (a, b))| if *a == 0.0 || *b == 0.0 { 0.0 } else { arrangements(t) * self.grid.weight(t) * a * b })
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self).unwrap()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), order: self.order, coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    pub fn add_assign(&mut self, other: &Self, c: f64) -> Result<()> {
        self.same_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order {
            return Err(Error::OrderMismatch(format!("orders {} and {}", self.order, other.order)));
        }
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid != other.grid {
            return Err(Error::InvalidParams("kernels live on different grids".into()));
        }
        Ok(())
    }

    /// Flat records `(q, sorted tuple, coefficient)` for the nonzero entries.
    pub fn records(&self) -> Vec<(usize, Vec<u16>, f64)> {
        self.index()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(t, &c)| (self.order, t.to_vec(), c))
            .collect()
    }
}

/// Dense, not necessarily symmetric tensor over `cells^q` in row-major order.
#[derive(Debug, Clone)]
pub struct RawTensor {
    pub grid: Arc<GridMeasure>,
    pub order: usize,
    pub data: Vec<f64>,
}

impl RawTensor {
    pub fn from_fn(grid: &Arc<GridMeasure>, q: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        let n = grid.len();
        let len = n.pow(q as u32);
        let mut t = vec![0usize; q];
        let data = (0..len)
            .map(|mut k| {
                for slot in t.iter_mut().rev() {
                    *slot = k % n;
                    k /= n;
                }
                f(&t)
            })
            .collect();
        Self { grid: grid.clone(), order: q, data }
    }

    fn offset(&self, t: &[u16]) -> usize {
        t.iter().fold(0, |acc, &i| acc * self.grid.len() + i as usize)
    }

    pub fn norm(&self) -> f64 {
        let n = self.grid.len();
        let mut s = 0.0;
        for (k, v) in self.data.iter().enumerate() {
            let (mut k, mut w) = (k, 1.0);
            for _ in 0..self.order {
                w *= self.grid.masses[k % n];
                k /= n;
            }
            s += v * v * w;
        }
        s.sqrt()
    }
}

/// Averages `raw` over all permutations of its arguments.
///
/// # Errors
/// [`Error::OrderMismatch`] when `q` or the data length do not fit the grid.
pub fn symmetrize(raw: &RawTensor, q: usize) -> Result<SymmetricKernel> {
    let n = raw.grid.len();
    if raw.order != q || raw.data.len() != n.pow(q as u32) {
        return Err(Error::OrderMismatch(format!("tensor of order {} and {} entries, asked for {q}", raw.order, raw.data.len())));
    }
    SymmetricKernel::from_fn(&raw.grid, q, |t| {
        let mut p = t.to_vec();
        let (mut sum, mut count) = (raw.data[raw.offset(&p)], 1.0);
        while next_permutation(&mut p) {
            sum += raw.data[raw.offset(&p)];
            count += 1.0;
        }
        sum / count
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;

    #[test]
    fn symmetrize_two_basis_product() {
        let g = GridMeasure::uniform(3, 3.0).unwrap();
        let raw = RawTensor::from_fn(&g, 2, |t| if t == [0, 1] { 1.0 } else { 0.0 });
        let s = symmetrize(&raw, 2).unwrap();
        assert_eq!(s.get(&[0, 1]), 0.5);
        assert_eq!(s.get(&[1, 0]), 0.5);
        assert_eq!(s.get(&[0, 0]), 0.0);
        assert!(symmetrize(&raw, 3).is_err());
    }

    #[test]
    fn symmetrize_contracts_norm_and_is_idempotent() {
        let g = GridMeasure::new(vec![0.5, 1.0, 2.0, 0.25]).unwrap();
        let mut rng = block_rng(11, 0);
        for _ in 0..5 {
            let vals: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
            let raw = RawTensor::from_fn(&g, 3, |t| vals[t[0] * 16 + t[1] * 4 + t[2]]);
            let s = symmetrize(&raw, 3).unwrap();
            assert!(s.norm() <= raw.norm() + 1e-12);
            let again = symmetrize(&RawTensor::from_fn(&g, 3, |t| s.get(t)), 3).unwrap();
            for (a, b) in s.coeffs().iter().zip(again.coeffs()) {
                assert!((a - b).abs() < 1e-15);
            }
            // the symmetric norm equals the dense norm of its expansion
            let dense = RawTensor::from_fn(&g, 3, |t| s.get(t));
            assert!((dense.norm() - s.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_vector_has_unit_norm() {
        let g = GridMeasure::new(vec![0.3, 0.7]).unwrap();
        let e = SymmetricKernel::unit(&g, 1).unwrap();
        assert!((e.norm() - 1.0).abs() < 1e-15);
        let e3 = SymmetricKernel::tensor_power(&e, 3).unwrap();
        assert!((e3.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn caps_reject_large_orders() {
        let g = GridMeasure::uniform(64, 1.0).unwrap();
        assert!(matches!(SymmetricKernel::zeros(&g, 6), Err(Error::CapExceeded(_))));
        assert!(SymmetricKernel::zeros(&g, 3).is_ok());
    }
}
