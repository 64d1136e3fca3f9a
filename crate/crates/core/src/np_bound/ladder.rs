use serde::{Deserialize, Serialize};

use super::wasserstein1_estimate;
use crate::error::Result;
use crate::gaussian_chaos::{block_kernel, fourth_moment_row, sample_gamma_pair, FourthMomentRow};
use crate::reference_laws::ReferenceLaw;
use crate::rng::derive_seed;
use crate::stats::{ls_slope, mean_se, nonincreasing_within, Estimate};

/// One rung of the second-chaos CLT ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRow {
    pub n: usize,
    pub chaos: FourthMomentRow,
    /// `|E[X^4] - 3|`
    pub excess_kurtosis: Estimate,
    pub max_contraction: f64,
    pub d_w: Estimate,
    /// `E|1 - ||DX||^2 / 2|`
    pub np_l1: Estimate,
    /// `Var(||DX||^2/q) <= (q-1)/(3q) (E[X^4] - 3)` within three combined errors
    pub bound_holds: bool,
}

/// The block-kernel sequence `f_n` on `n` cells, for each `n` in `ns`.
pub fn normal_clt_ladder(ns: &[usize], n_paths: usize, seed: u64) -> Result<Vec<LadderRow>> {
    let normal = ReferenceLaw::catalog("normal", &Default::default())?;
    ns.iter()
        .enumerate()
        .map(|(i, &n)| {
            let f = block_kernel(n)?;
            let s = derive_seed(seed, i as u64);
            let (xs, ys) = sample_gamma_pair(&f, n_paths, s)?;
            let chaos = fourth_moment_row(&f, 1.0, &xs, &ys)?;
            let m4 = chaos.fourth_moment;
            let band = 3.0 * (chaos.var_gamma.stderr.powi(2) + chaos.bound.stderr.powi(2)).sqrt();
            Ok(LadderRow {
                n,
                excess_kurtosis: Estimate { value: (m4.value - 3.0).abs(), stderr: m4.stderr },
                max_contraction: chaos.contraction_norms.values().copied().fold(0.0, f64::max),
                d_w: wasserstein1_estimate(&xs, &normal, 20, derive_seed(s, 1))?,
                np_l1: mean_se(&ys.iter().map(|y| (1.0 - y).abs()).collect::<Vec<_>>()),
                bound_holds: chaos.var_gamma.value <= chaos.bound.value + band,
                chaos,
            })
        })
        .collect()
}

/// Finite-sample convergence summary of a positive sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trend {
    /// least-squares slope of `ln value` on `ln n`
    pub slope: f64,
    /// steps that went down
    pub decreasing_steps: usize,
    pub steps: usize,
    /// never rises by more than two combined standard errors
    pub monotone: bool,
}

impl Trend {
    /// Negative slope and a monotone path.
    pub fn decreasing(&self) -> bool {
        self.slope < 0.0 && self.monotone
    }
}

pub fn trend(ns: &[usize], values: &[Estimate]) -> Trend {
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.value.max(f64::MIN_POSITIVE).ln()).collect();
    Trend {
        slope: ls_slope(&lx, &ly),
        decreasing_steps: values.windows(2).filter(|w| w[1].value < w[0].value).count(),
        steps: values.len().saturating_sub(1),
        monotone: nonincreasing_within(values, 2.0),
    }
}
