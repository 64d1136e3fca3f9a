//! Exact sampling of multiple integrals of grid kernels.
//!
//! For a multiset with cell multiplicities `m_j`,
//! `I_q(1_{c_1} (x) ... (x) 1_{c_q}) = prod_j J_{m_j}(c_j)` where a Gaussian
//! cell gives `J_m = mu^{m/2} H_m(zeta)` and a jump cell with size `x` and
//! Poisson count `N ~ Poisson(lambda)`, `lambda = mu / x^2`, gives the
//! Charlier value `J_m = x^m C_m(N; lambda)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::chaos::ChaosVector;
use super::index::{arrangements, multiplicities};
use super::kernel::{Caps, GridMeasure};
use crate::error::{Error, Result};
use crate::rng::par_paths_with;

/// One path of cell noise: `zeta` for Gaussian cells, counts for jump cells.
#[derive(Debug, Clone)]
pub struct Noise {
    pub values: Vec<f64>,
}

impl Noise {
    pub fn draw(grid: &GridMeasure, rng: &mut ChaCha8Rng) -> Self {
        let values = grid
            .masses
            .iter()
            .zip(&grid.jumps)
            .map(|(&mu, &x)| {
                if x == 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    Poisson::new(mu / (x * x)).expect("positive intensity").sample(rng)
                }
            })
            .collect();
        Self { values }
    }

    /// The cell increments `M(c)`: `sqrt(mu) zeta` or `x (N - lambda)`.
    pub fn increments(&self, grid: &GridMeasure) -> Vec<f64> {
        self.values
            .iter()
            .zip(grid.masses.iter().zip(&grid.jumps))
            .map(|(&v, (&mu, &x))| if x == 0.0 { mu.sqrt() * v } else { x * (v - mu / (x * x)) })
            .collect()
    }
}

/// `J_m(c)` for `m <= max_order` at every cell, row-major by cell.
#[derive(Debug, Clone)]
pub struct JTable {
    width: usize,
    data: Vec<f64>,
}

impl JTable {
    pub fn new(grid: &GridMeasure, max_order: usize) -> Self {
        let width = max_order + 1;
        Self { width, data: vec![0.0; width * grid.len()] }
    }

    pub fn fill(&mut self, grid: &GridMeasure, noise: &Noise) {
        let w = self.width;
        for (c, row) in self.data.chunks_mut(w).enumerate() {
            let (mu, x, v) = (grid.masses[c], grid.jumps[c], noise.values[c]);
            row[0] = 1.0;
            if w == 1 {
                continue;
            }
            if x == 0.0 {
                // probabilists' Hermite recursion, then scale by mu^{m/2}
                row[1] = v;
                for m in 1..w - 1 {
                    row[m + 1] = v * row[m] - m as f64 * row[m - 1];
                }
                let s = mu.sqrt();
                let mut p = 1.0;
                for r in row.iter_mut().skip(1) {
                    p *= s;
                    *r *= p;
                }
            } else {
                let lam = mu / (x * x);
                row[1] = v - lam;
                for m in 1..w - 1 {
                    row[m + 1] = (v - m as f64 - lam) * row[m] - m as f64 * lam * row[m - 1];
                }
                let mut p = 1.0;
                for r in row.iter_mut().skip(1) {
                    p *= x;
                    *r *= p;
                }
            }
        }
    }

    pub fn get(&self, cell: usize, m: usize) -> f64 {
        self.data[cell * self.width + m]
    }
}

/// Sparse evaluation plan for a chaos vector.
#[derive(Debug, Clone)]
pub struct ChaosPlan {
    constant: f64,
    coefs: Vec<f64>,
    offsets: Vec<u32>,
    factors: Vec<(u16, u8)>,
    pub max_order: usize,
}

impl ChaosPlan {
    pub fn new(f: &ChaosVector) -> Result<Self> {
        Self::with_caps(f, Caps::default())
    }

    pub fn with_caps(f: &ChaosVector, caps: Caps) -> Result<Self> {
        let n = f.grid().len();
        let mut plan = Self { constant: f.mean(), coefs: vec![], offsets: vec![0], factors: vec![], max_order: 0 };
        for (&q, k) in f.kernels() {
            if q == 0 {
                continue;
            }
            caps.check(n, q)?;
            for (t, &c) in k.index().iter().zip(k.coeffs()) {
                if c == 0.0 {
                    continue;
                }
                plan.coefs.push(arrangements(t) * c);
                plan.factors.extend(multiplicities(t));
                plan.offsets.push(plan.factors.len() as u32);
                plan.max_order = plan.max_order.max(q);
            }
        }
        Ok(plan)
    }

    pub fn eval(&self, j: &JTable) -> f64 {
        let mut s = self.constant;
        for (i, &c) in self.coefs.iter().enumerate() {
            let fs = &self.factors[self.offsets[i] as usize..self.offsets[i + 1] as usize];
            s += c * fs.iter().map(|&(cell, m)| j.get(cell as usize, m as usize)).product::<f64>();
        }
        s
    }

    pub fn terms(&self) -> usize {
        self.coefs.len()
    }
}

/// Samples of `F`, deterministic in `seed` for any thread count.
pub fn sample(f: &ChaosVector, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_joint(&[f], n_paths, seed)?.pop().unwrap())
}

/// Samples of several chaos vectors on shared noise, one column per vector.
pub fn sample_joint(fs: &[&ChaosVector], n_paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_joint_with_caps(fs, n_paths, seed, Caps::default())
}

/// [`sample_joint`] under explicit caps.
pub fn sample_joint_with_caps(fs: &[&ChaosVector], n_paths: usize, seed: u64, caps: Caps) -> Result<Vec<Vec<f64>>> {
    let grid = fs.first().ok_or_else(|| Error::InvalidParams("nothing to sample".into()))?.grid().clone();
    if fs.iter().any(|f| **f.grid() != *grid) {
        return Err(Error::InvalidParams("chaos vectors live on different grids".into()));
    }
    let plans = fs.iter().map(|f| ChaosPlan::with_caps(f, caps)).collect::<Result<Vec<_>>>()?;
    let top = plans.iter().map(|p| p.max_order).max().unwrap_or(0);
    let rows = par_paths_with(
        n_paths,
        seed,
        || JTable::new(&grid, top),
        |rng, table| {
            let noise = Noise::draw(&grid, rng);
            table.fill(&grid, &noise);
            plans.iter().map(|p| p.eval(table)).collect::<Vec<f64>>()
        },
    );
    let mut cols = vec![Vec::with_capacity(n_paths); fs.len()];
    for row in rows {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    Ok(cols)
}
