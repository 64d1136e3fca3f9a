//! Wiener-Poisson chaos on a time-by-jump grid.
//!
//! A [`LevyGrid`] splits `[0, T]` into time cells and attaches to each one
//! a Brownian cell of mass `sigma^2 dt` and one jump cell per atom
//! `(x_j, nu_j)` of mass `x_j^2 dt nu_j`. The resulting [`GridMeasure`]
//! carries the jump sizes, so kernels, contractions, products and the exact
//! sampler all come from [`crate::gaussian_chaos`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_chaos::{
    contract_ws as grid_contract_ws, contraction_norm_ws, malliavin_d, product_expand, sample_joint_with_caps, Caps, ChaosPlan,
    ChaosVector, Contraction, GridMeasure, JTable, Noise, ProductResidual, SymmetricKernel,
};
use crate::gaussian_chaos::index::multiset_count;
use crate::np_bound::wasserstein1_estimate;
use crate::reference_laws::ReferenceLaw;
use crate::rng::{derive_seed, par_paths_with};
use crate::stats::{mean_of, mean_se, variance_se, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    /// jump size, nonzero
    pub x: f64,
    /// intensity per unit time
    pub nu: f64,
}

/// What a cell records within its time cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Brownian,
    Atom(usize),
}

/// Time cells crossed with `{Brownian} + jump atoms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyGrid {
    pub time_cells: Vec<f64>,
    pub jump_atoms: Vec<JumpAtom>,
    pub sigma: f64,
}

impl LevyGrid {
    pub fn new(time_cells: Vec<f64>, jump_atoms: Vec<JumpAtom>, sigma: f64) -> Result<Self> {
        if time_cells.is_empty() || time_cells.iter().any(|&dt| !(dt > 0.0 && dt.is_finite())) {
            return Err(Error::InvalidParams("time cells must be positive and finite".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma = {sigma}")));
        }
        if sigma == 0.0 && jump_atoms.is_empty() {
            return Err(Error::InvalidParams("need sigma > 0 or at least one jump atom".into()));
        }
        if jump_atoms.iter().any(|a| a.x == 0.0 || !a.x.is_finite() || !(a.nu > 0.0 && a.nu.is_finite())) {
            return Err(Error::InvalidParams("jump atoms need x != 0 and nu > 0".into()));
        }
        Ok(Self { time_cells, jump_atoms, sigma })
    }

    /// `n` equal time cells on `[0, horizon]`.
    pub fn uniform(n: usize, horizon: f64, jump_atoms: Vec<JumpAtom>, sigma: f64) -> Result<Self> {
        Self::new(vec![horizon / n as f64; n], jump_atoms, sigma)
    }

    fn slots(&self) -> usize {
        usize::from(self.sigma > 0.0) + self.jump_atoms.len()
    }

    pub fn len(&self) -> usize {
        self.time_cells.len() * self.slots()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell(&self, time: usize, mark: Mark) -> Option<usize> {
        let b = usize::from(self.sigma > 0.0);
        let slot = match mark {
            Mark::Brownian if b == 1 => 0,
            Mark::Atom(j) if j < self.jump_atoms.len() => b + j,
            _ => return None,
        };
        (time < self.time_cells.len()).then(|| time * self.slots() + slot)
    }

    pub fn locate(&self, cell: usize) -> (usize, Mark) {
        let (t, slot) = (cell / self.slots(), cell % self.slots());
        let b = usize::from(self.sigma > 0.0);
        if slot < b {
            (t, Mark::Brownian)
        } else {
            (t, Mark::Atom(slot - b))
        }
    }

    pub fn total_mass(&self) -> f64 {
        let horizon: f64 = self.time_cells.iter().sum();
        horizon * (self.sigma * self.sigma + self.jump_atoms.iter().map(|a| a.x * a.x * a.nu).sum::<f64>())
    }

    /// Cell masses and jump sizes as a chaos grid.
    pub fn measure(&self) -> Result<Arc<GridMeasure>> {
        let mut masses = Vec::with_capacity(self.len());
        let mut jumps = Vec::with_capacity(self.len());
        for &dt in &self.time_cells {
            if self.sigma > 0.0 {
                masses.push(self.sigma * self.sigma * dt);
                jumps.push(0.0);
            }
            for a in &self.jump_atoms {
                masses.push(a.x * a.x * dt * a.nu);
                jumps.push(a.x);
            }
        }
        GridMeasure::with_jumps(masses, jumps)
    }
}

/// Desk-scale limits for Wiener-Poisson sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WpCaps {
    pub max_time_cells: usize,
    pub max_atoms: usize,
    pub max_order: usize,
}

impl Default for WpCaps {
    fn default() -> Self {
        Self { max_time_cells: 16, max_atoms: 4, max_order: 2 }
    }
}

impl WpCaps {
    /// Wider time axis used by the fourth-moment ladder.
    pub fn ladder() -> Self {
        Self { max_time_cells: 128, ..Self::default() }
    }

    pub fn check(&self, levy: &LevyGrid, q: usize) -> Result<()> {
        if levy.time_cells.len() > self.max_time_cells {
            return Err(Error::CapExceeded(format!("{} time cells > {}", levy.time_cells.len(), self.max_time_cells)));
        }
        if levy.jump_atoms.len() > self.max_atoms {
            return Err(Error::CapExceeded(format!("{} jump atoms > {}", levy.jump_atoms.len(), self.max_atoms)));
        }
        if q > self.max_order {
            return Err(Error::CapExceeded(format!("order {q} > {}", self.max_order)));
        }
        Ok(())
    }

    /// Sampling caps for chaos vectors up to order `q` on `levy`.
    fn sampling(&self, levy: &LevyGrid, q: usize) -> Caps {
        Caps { max_cells: levy.len(), max_order: q, ..Caps::default() }
    }
}

/// Symmetric kernel on `(time, mark)` cells.
#[derive(Debug, Clone)]
pub struct WPKernel {
    levy: Arc<LevyGrid>,
    kernel: SymmetricKernel,
}

/// One stored coefficient with its cells spelled out.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WpRecord {
    pub rank: usize,
    pub cells: Vec<(usize, Mark)>,
    pub value: f64,
}

impl WPKernel {
    pub fn from_fn(levy: &Arc<LevyGrid>, q: usize, mut f: impl FnMut(&[(usize, Mark)]) -> f64) -> Result<Self> {
        let grid = levy.measure()?;
        let mut buf = Vec::with_capacity(q);
        let kernel = SymmetricKernel::from_fn(&grid, q, |t| {
            buf.clear();
            buf.extend(t.iter().map(|&c| levy.locate(c as usize)));
            f(&buf)
        })?;
        Ok(Self { levy: levy.clone(), kernel })
    }

    /// Wraps a kernel already living on `levy.measure()`.
    pub fn from_kernel(levy: &Arc<LevyGrid>, kernel: SymmetricKernel) -> Result<Self> {
        if **kernel.grid() != *levy.measure()? {
            return Err(Error::InvalidParams("kernel grid does not match the Levy grid".into()));
        }
        Ok(Self { levy: levy.clone(), kernel })
    }

    pub fn levy(&self) -> &Arc<LevyGrid> {
        &self.levy
    }

    pub fn kernel(&self) -> &SymmetricKernel {
        &self.kernel
    }

    pub fn order(&self) -> usize {
        self.kernel.order()
    }

    /// `q! ||f||^2`
    pub fn second_moment(&self) -> f64 {
        crate::gaussian_chaos::index::factorial(self.order()) * self.kernel.norm_sq()
    }

    pub fn chaos(&self) -> ChaosVector {
        ChaosVector::single(self.kernel.clone())
    }

    pub fn records(&self) -> Vec<WpRecord> {
        self.kernel
            .records()
            .into_iter()
            .map(|(rank, t, value)| WpRecord { rank, cells: t.iter().map(|&c| self.levy.locate(c as usize)).collect(), value })
            .collect()
    }
}

fn same_levy(f: &WPKernel, g: &WPKernel) -> Result<()> {
    if *f.levy != *g.levy {
        return Err(Error::InvalidParams("kernels live on different Levy grids".into()));
    }
    Ok(())
}

/// `f (x)_r^s g`; shared variables only pick up jump cells.
pub fn contract_ws(f: &WPKernel, g: &WPKernel, r: usize, s: usize) -> Result<Contraction> {
    same_levy(f, g)?;
    grid_contract_ws(&f.kernel, &g.kernel, r, s)
}

/// Chaos expansion of `I_q(f) I_p(g)` including the shared-jump terms.
pub fn product_expand_wp(f: &WPKernel, g: &WPKernel) -> Result<ChaosVector> {
    same_levy(f, g)?;
    product_expand(&f.kernel, &g.kernel)
}

/// Samples of `I_q(f)`.
pub fn sample_wp(f: &WPKernel, n_paths: usize, seed: u64, caps: WpCaps) -> Result<Vec<f64>> {
    caps.check(&f.levy, f.order())?;
    let x = f.chaos();
    Ok(sample_joint_with_caps(&[&x], n_paths, seed, caps.sampling(&f.levy, f.order()))?.pop().unwrap())
}

/// Product formula residual on shared noise.
pub fn product_residual_wp(f: &WPKernel, g: &WPKernel, n_paths: usize, seed: u64, caps: WpCaps) -> Result<ProductResidual> {
    caps.check(&f.levy, f.order().max(g.order()))?;
    let e = product_expand_wp(f, g)?;
    let (a, b) = (f.chaos(), g.chaos());
    let cols = sample_joint_with_caps(&[&a, &b, &e], n_paths, seed, caps.sampling(&f.levy, f.order() + g.order()))?;
    let prod: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(x, y)| x * y).collect();
    let d: Vec<f64> = prod.iter().zip(&cols[2]).map(|(p, e)| p - e).collect();
    Ok(ProductResidual {
        orders: (f.order(), g.order()),
        mean: mean_se(&d),
        mean_square: mean_of(&d, |v| v * v),
        product_mean: mean_se(&prod),
    })
}

/// Per-path functionals of `X = I_q(f)` and its derivative field.
#[derive(Debug, Clone, Copy)]
struct PathStats {
    x: f64,
    /// `||DX||^2`
    gamma: f64,
    /// `sum_z x^2 (D_z X)^4 mu(z)`
    jump_quartic: f64,
    /// `sum_z |x| |D_z X|^3 mu(z)`
    jump_cubic: f64,
}

fn path_stats(f: &WPKernel, n_paths: usize, seed: u64, caps: WpCaps) -> Result<Vec<PathStats>> {
    let q = f.order();
    caps.check(&f.levy, q)?;
    let grid = f.kernel.grid().clone();
    let sc = caps.sampling(&f.levy, q);
    let plan = ChaosPlan::with_caps(&f.chaos(), sc)?;
    let d_plans = malliavin_d(&f.chaos())?.iter().map(|d| ChaosPlan::with_caps(d, sc)).collect::<Result<Vec<_>>>()?;
    Ok(par_paths_with(
        n_paths,
        seed,
        || JTable::new(&grid, q),
        |rng, table| {
            table.fill(&grid, &Noise::draw(&grid, rng));
            let mut s = PathStats { x: plan.eval(table), gamma: 0.0, jump_quartic: 0.0, jump_cubic: 0.0 };
            for (c, p) in d_plans.iter().enumerate() {
                let (mu, x) = (grid.masses[c], grid.jumps[c]);
                let d = p.eval(table);
                s.gamma += mu * d * d;
                if x != 0.0 {
                    s.jump_quartic += x * x * d.powi(4) * mu;
                    s.jump_cubic += x.abs() * d.abs().powi(3) * mu;
                }
            }
            s
        },
    ))
}

/// Monte Carlo of the jump term `(1/q) E[sum_z |x| |D_z X|^3 mu(z)]` for a
/// single-chaos `X = I_q(f)`, where `-D L^{-1} X = DX / q`.
pub fn jump_term_estimate(f: &WPKernel, n_paths: usize, seed: u64, caps: WpCaps) -> Result<Estimate> {
    let q = f.order() as f64;
    let stats = path_stats(f, n_paths, seed, caps)?;
    Ok(mean_se(&stats.iter().map(|s| s.jump_cubic / q).collect::<Vec<_>>()))
}

/// Both sides of `E[F^3] = 2 E[F] ||f||^2 + sum_z x f(z)^3 mu(z)` for
/// `F = I_1(f)`, whose derivative `D_z F = f(z)` is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpMomentCheck {
    pub lhs: Estimate,
    pub gaussian_part: Estimate,
    pub jump_part: f64,
    /// `lhs - gaussian_part - jump_part` per path
    pub diff: Estimate,
}

pub fn third_moment_check(f: &WPKernel, n_paths: usize, seed: u64, caps: WpCaps) -> Result<JumpMomentCheck> {
    if f.order() != 1 {
        return Err(Error::OrderMismatch(format!("third moment check needs q = 1, got {}", f.order())));
    }
    let grid = f.kernel.grid();
    let jump_part: f64 = (0..grid.len()).map(|c| grid.jumps[c] * f.kernel.coeffs()[c].powi(3) * grid.masses[c]).sum();
    let norm2 = f.kernel.norm_sq();
    let xs = sample_wp(f, n_paths, seed, caps)?;
    let gauss: Vec<f64> = xs.iter().map(|x| 2.0 * x * norm2).collect();
    let diff: Vec<f64> = xs.iter().zip(&gauss).map(|(x, g)| x.powi(3) - g - jump_part).collect();
    Ok(JumpMomentCheck { lhs: mean_of(&xs, |x| x.powi(3)), gaussian_part: mean_se(&gauss), jump_part, diff: mean_se(&diff) })
}

/// `(r, s)` pairs whose contraction norms the fourth-moment theorem needs
/// to vanish: `s = 0, 1 <= r < q` and `r = 0, 1 <= s <= q`.
pub fn flagged_pairs(q: usize) -> Vec<(usize, usize)> {
    (1..q).map(|r| (r, 0)).chain((1..=q).map(|s| (0, s))).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlaggedNorm {
    pub r: usize,
    pub s: usize,
    pub norm: f64,
}

/// One rung of a Wiener-Poisson fourth-moment ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WpRow {
    pub time_cells: usize,
    pub cells: usize,
    pub order: usize,
    /// `q! ||f||^2`
    pub second_moment: f64,
    pub flagged: Vec<FlaggedNorm>,
    pub max_flagged: f64,
    pub fourth_moment: Estimate,
    /// `E[X^4]` from the chaos expansion of `X^2`, on grids small enough
    pub fourth_moment_exact: Option<f64>,
    pub d_w: Estimate,
    /// `E ||DX||^4`, tends to `q^2`
    pub gamma_sq: Estimate,
    /// `Var ||DX||^2`, tends to 0
    pub var_gamma: Estimate,
    /// `E int x^2 (DX)^4 dmu`, tends to 0
    pub jump_quartic: Estimate,
    /// `(1/q) E int |x| |DX|^3 dmu`
    pub jump_term: Estimate,
}

const EXACT_FOURTH_LIMIT: usize = 1 << 17;

/// Fourth-moment diagnostics along a sequence of `X_n = I_q(f_n)`.
///
/// # Errors
/// [`Error::AssumptionViolation`] when `q! ||f_n||^2` is off 1 by more than
/// `1e-8`; [`Error::CapExceeded`] from the grid caps.
pub fn wp_fourth_moment_report(seq: &[WPKernel], n_paths: usize, seed: u64, caps: WpCaps) -> Result<Vec<WpRow>> {
    let normal = ReferenceLaw::catalog("normal", &BTreeMap::new())?;
    seq.iter()
        .enumerate()
        .map(|(i, f)| {
            let q = f.order();
            let m2 = f.second_moment();
            if (m2 - 1.0).abs() > 1e-8 {
                return Err(Error::AssumptionViolation(format!("q! ||f||^2 = {m2}, expected 1")));
            }
            let s = derive_seed(seed, i as u64);
            let stats = path_stats(f, n_paths, s, caps)?;
            let xs: Vec<f64> = stats.iter().map(|p| p.x).collect();
            let gammas: Vec<f64> = stats.iter().map(|p| p.gamma).collect();
            let flagged = flagged_pairs(q)
                .into_iter()
                .map(|(r, s)| Ok(FlaggedNorm { r, s, norm: contraction_norm_ws(&f.kernel, &f.kernel, r, s)? }))
                .collect::<Result<Vec<_>>>()?;
            let n = f.kernel.grid().len();
            let fourth_moment_exact = if multiset_count(n, 2 * q) <= EXACT_FOURTH_LIMIT {
                let x = f.chaos();
                Some(x.mul(&x)?.second_moment())
            } else {
                None
            };
            Ok(WpRow {
                time_cells: f.levy.time_cells.len(),
                cells: n,
                order: q,
                second_moment: m2,
                max_flagged: flagged.iter().map(|c| c.norm).fold(0.0, f64::max),
                flagged,
                fourth_moment: mean_of(&xs, |v| v.powi(4)),
                fourth_moment_exact,
                d_w: wasserstein1_estimate(&xs, &normal, 20, derive_seed(s, 1))?,
                gamma_sq: mean_of(&gammas, |g| g * g),
                var_gamma: variance_se(&gammas),
                jump_quartic: mean_se(&stats.iter().map(|p| p.jump_quartic).collect::<Vec<_>>()),
                jump_term: mean_se(&stats.iter().map(|p| p.jump_cubic / q as f64).collect::<Vec<_>>()),
            })
        })
        .collect()
}

/// Scale factors of the four atoms in [`shrinking_atom_sequence`]; the
/// per-cell Poisson intensities are `0.2 / a^2`, between 5 and 32.
const SHRINK_SCALES: [f64; 4] = [0.2, 0.15, 0.1, 0.08];

/// `X_n = I_2(f_n)` on `n` time cells of `[0, 1]` with `sigma^2 = 0.2` and
/// four atoms of size `a_j / sqrt(n)` carrying mass `0.2` each, `f_n` the
/// normalized diagonal block kernel. Jump sizes shrink while the number of
/// jump cells grows, so every flagged contraction vanishes.
pub fn shrinking_atom_sequence(ns: &[usize]) -> Result<Vec<WPKernel>> {
    ns.iter()
        .map(|&n| {
            let rn = (n as f64).sqrt();
            let atoms = SHRINK_SCALES.iter().map(|&a| JumpAtom { x: a / rn, nu: 0.2 * n as f64 / (a * a) }).collect();
            let levy = Arc::new(LevyGrid::uniform(n, 1.0, atoms, 0.2f64.sqrt())?);
            let kernel = crate::gaussian_chaos::block_kernel_on(&levy.measure()?)?;
            WPKernel::from_kernel(&levy, kernel)
        })
        .collect()
}

/// Negative control: one atom `x = 1/2` of intensity 4 on `[0, 1]`, no
/// Brownian part, and the constant kernel `f = 2^{-1/2}`. Refining the time
/// axis leaves `X = ((N - 4)^2 - N) / (4 sqrt(2))` with `N ~ Poisson(4)`
/// unchanged.
pub fn constant_atom_sequence(ns: &[usize]) -> Result<Vec<WPKernel>> {
    ns.iter()
        .map(|&n| {
            let levy = Arc::new(LevyGrid::uniform(n, 1.0, vec![JumpAtom { x: 0.5, nu: 4.0 }], 0.0)?);
            WPKernel::from_fn(&levy, 2, |_| std::f64::consts::FRAC_1_SQRT_2)
        })
        .collect()
}
