//! Sample statistics with standard errors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::block_rng;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// True when `target` lies within `k` standard errors (plus `slack`).
    pub fn covers(&self, target: f64, k: f64, slack: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr + slack
    }
}

/// Mean with the standard error of the mean.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return Estimate { value: f64::NAN, stderr: f64::NAN };
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate { value: m, stderr: f64::INFINITY };
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    Estimate { value: m, stderr: (v / n).sqrt() }
}

/// Mean of `f(x)` over the sample.
pub fn mean_of(xs: &[f64], f: impl Fn(f64) -> f64) -> Estimate {
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    mean_se(&ys)
}

/// Sample variance with a delta-method standard error.
pub fn variance_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let d2: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let e = mean_se(&d2);
    Estimate { value: e.value * n / (n - 1.0), stderr: e.stderr }
}

/// Bootstrap standard error of an arbitrary statistic.
pub fn bootstrap_se(xs: &[f64], reps: usize, seed: u64, stat: impl Fn(&[f64]) -> f64) -> f64 {
    let n = xs.len();
    let mut rng = block_rng(seed, u64::MAX);
    let mut buf = vec![0.0; n];
    let vals: Vec<f64> = (0..reps)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    variance_se(&vals).value.sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// True when the sequence never rises by more than `k` combined standard
/// errors between consecutive rungs.
pub fn nonincreasing_within(values: &[Estimate], k: f64) -> bool {
    values.windows(2).all(|w| {
        let band = k * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        w[1].value <= w[0].value + band
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se_of_known_sample() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        // sample sd = sqrt(5/3)
        assert!((e.stderr - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((ls_slope(&x, &y) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn band_tolerates_noise_but_not_trend() {
        let e = |v| Estimate { value: v, stderr: 0.1 };
        assert!(nonincreasing_within(&[e(1.0), e(1.1), e(0.5)], 2.0));
        assert!(!nonincreasing_within(&[e(1.0), e(2.0)], 2.0));
    }
}
