use serde::{Deserialize, Serialize};

use super::GammaSamples;
use crate::error::{Error, Result};
use crate::stats::mean_se;

const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum RegressionMethod {
    /// equal-count bins
    Bins(usize),
    /// average of the `k` nearest samples in `x`
    Knn(usize),
}

impl Default for RegressionMethod {
    fn default() -> Self {
        Self::Bins(50)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub g_hat: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Estimate of `x -> E[Y | X = x]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalMean {
    pub method: RegressionMethod,
    /// bin table; for k-NN the bins summarize the fit at equal-count nodes
    pub bins: Vec<Bin>,
    #[serde(skip)]
    sorted: Vec<(f64, f64)>,
}

impl ConditionalMean {
    pub fn eval(&self, x: f64) -> f64 {
        match self.method {
            RegressionMethod::Bins(_) => {
                let i = self.bins.partition_point(|b| b.hi < x).min(self.bins.len() - 1);
                self.bins[i].g_hat
            }
            RegressionMethod::Knn(k) => knn_mean(&self.sorted, x, k),
        }
    }
}

fn knn_mean(sorted: &[(f64, f64)], x: f64, k: usize) -> f64 {
    let k = k.min(sorted.len()).max(1);
    let mut hi = sorted.partition_point(|p| p.0 < x);
    let mut lo = hi;
    let mut s = 0.0;
    for _ in 0..k {
        let take_left = match (lo > 0, hi < sorted.len()) {
            (true, true) => x - sorted[lo - 1].0 <= sorted[hi].0 - x,
            (true, false) => true,
            _ => false,
        };
        if take_left {
            lo -= 1;
            s += sorted[lo].1;
        } else {
            s += sorted[hi].1;
            hi += 1;
        }
    }
    s / k as f64
}

/// Nonparametric regression of `Y` on `X`.
///
/// # Errors
/// [`Error::TooFewSamples`] below 1000 pairs.
pub fn conditional_regress(samples: &GammaSamples, method: RegressionMethod) -> Result<ConditionalMean> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    let mut sorted: Vec<(f64, f64)> = samples.x.iter().copied().zip(samples.y.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nb = match method {
        RegressionMethod::Bins(b) | RegressionMethod::Knn(b) => b,
    };
    let nb = nb.clamp(1, n);
    let bins = (0..nb)
        .map(|b| {
            let part = &sorted[b * n / nb..(b + 1) * n / nb];
            let ys: Vec<f64> = part.iter().map(|p| p.1).collect();
            let e = mean_se(&ys);
            let center = part.iter().map(|p| p.0).sum::<f64>() / part.len() as f64;
            let g_hat = match method {
                RegressionMethod::Bins(_) => e.value,
                RegressionMethod::Knn(k) => knn_mean(&sorted, center, k),
            };
            Bin { lo: part[0].0, hi: part[part.len() - 1].0, center, g_hat, stderr: e.stderr, count: part.len() }
        })
        .collect();
    Ok(ConditionalMean { method, bins, sorted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::malliavin_numeric::{GammaMeta, GammaMethod};
    use crate::rng::block_rng;
    use rand::Rng;

    fn pairs(x: Vec<f64>, y: Vec<f64>) -> GammaSamples {
        let meta = GammaMeta { n_paths: x.len(), seed: 0, method: GammaMethod::Chaos, mehler: None };
        GammaSamples { x, y, meta }
    }

    #[test]
    fn recovers_a_parabola() {
        let mut rng = block_rng(1, 0);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.3 * (rng.random::<f64>() - 0.5)).collect();
        let s = pairs(x, y);
        let g = conditional_regress(&s, RegressionMethod::Bins(50)).unwrap();
        for b in &g.bins {
            // bin width bias plus 4 standard errors
            let spread = (b.hi * b.hi - b.lo * b.lo).abs();
            assert!((b.g_hat - b.center * b.center).abs() < 4.0 * b.stderr + spread);
        }
        let k = conditional_regress(&s, RegressionMethod::Knn(200)).unwrap();
        assert!((k.eval(1.0) - 1.0).abs() < 0.05);
    }

    #[test]
    fn too_few_samples() {
        let s = pairs(vec![0.0; 10], vec![0.0; 10]);
        assert_eq!(conditional_regress(&s, RegressionMethod::default()).unwrap_err(), Error::TooFewSamples { needed: 1000, got: 10 });
    }
}
