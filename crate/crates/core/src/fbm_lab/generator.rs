use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::par_paths_with;

/// Longest path.
pub const MAX_STEPS: usize = 1 << 14;
/// Largest `paths * steps` held in memory by [`FgnGenerator::sample`].
pub const MAX_VALUES: usize = 1 << 25;
/// Largest `n` for the Cholesky fallback.
const CHOLESKY_MAX: usize = 2048;

/// `C(t) = (|t+1|^{2H} + |t-1|^{2H} - 2|t|^{2H}) / 2`.
pub fn fgn_covariance(hurst: f64, t: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * ((t + 1.0).abs().powf(e) + (t - 1.0).abs().powf(e) - 2.0 * t.abs().powf(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgnMethod {
    Circulant,
    Cholesky,
}

enum Engine {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { l: DMatrix<f64> },
}

/// Exact sampler of `n` consecutive fGn values with `C(0) = 1`.
pub struct FgnGenerator {
    pub hurst: f64,
    pub n: usize,
    engine: Engine,
}

/// Row-major `paths x n` matrix.
#[derive(Debug, Clone)]
pub struct FgnPaths {
    pub n: usize,
    pub data: Vec<f64>,
}

impl FgnPaths {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl FgnGenerator {
    /// Circulant embedding, falling back to Cholesky for small `n` when the
    /// embedding is not positive semidefinite.
    pub fn new(hurst: f64, n: usize) -> Result<Self> {
        match Self::circulant(hurst, n) {
            Err(Error::EmbeddingNotPSD(_)) if n <= CHOLESKY_MAX => Self::cholesky(hurst, n),
            other => other,
        }
    }

    fn check(hurst: f64, n: usize) -> Result<()> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::DomainError(format!("Hurst index {hurst}")));
        }
        if n == 0 || n > MAX_STEPS {
            return Err(Error::CapExceeded(format!("{n} steps, allowed 1..={MAX_STEPS}")));
        }
        Ok(())
    }

    pub fn circulant(hurst: f64, n: usize) -> Result<Self> {
        Self::check(hurst, n)?;
        let m = 2 * n;
        let mut c: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let lag = if k <= n { k } else { m - k };
                Complex::new(fgn_covariance(hurst, lag as f64), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut c);
        let top = c.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
        let low = c.iter().fold(f64::INFINITY, |a, z| a.min(z.re));
        if low < -1e-10 * top {
            return Err(Error::EmbeddingNotPSD(low));
        }
        let sqrt_eig = c.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { hurst, n, engine: Engine::Circulant { sqrt_eig, fft } })
    }

    pub fn cholesky(hurst: f64, n: usize) -> Result<Self> {
        Self::check(hurst, n)?;
        if n > CHOLESKY_MAX {
            return Err(Error::CapExceeded(format!("Cholesky with {n} > {CHOLESKY_MAX} steps")));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| fgn_covariance(hurst, i as f64 - j as f64));
        let l = cov.cholesky().ok_or_else(|| Error::AssumptionViolation("fGn covariance not positive definite".into()))?.l();
        Ok(Self { hurst, n, engine: Engine::Cholesky { l } })
    }

    pub fn method(&self) -> FgnMethod {
        match self.engine {
            Engine::Circulant { .. } => FgnMethod::Circulant,
            Engine::Cholesky { .. } => FgnMethod::Cholesky,
        }
    }

    /// Draws two independent paths into `a` and `b`.
    fn draw_pair(&self, rng: &mut impl Rng, buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>], a: &mut [f64], b: &mut [f64]) {
        match &self.engine {
            Engine::Circulant { sqrt_eig, fft } => {
                for (z, &s) in buf.iter_mut().zip(sqrt_eig) {
                    *z = Complex::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal));
                }
                fft.process_with_scratch(buf, scratch);
                for i in 0..self.n {
                    a[i] = buf[i].re;
                    b[i] = buf[i].im;
                }
            }
            Engine::Cholesky { l } => {
                for out in [a, b] {
                    let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                    }
                }
            }
        }
    }

    /// Applies `f` to `paths` fresh paths without storing them. Pairs of
    /// paths share one transform; results are in path order and do not
    /// depend on the thread count.
    pub fn map_paths<T: Send>(&self, paths: usize, seed: u64, f: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
        let m = 2 * self.n;
        let scratch_len = match &self.engine {
            Engine::Circulant { fft, .. } => fft.get_inplace_scratch_len(),
            Engine::Cholesky { .. } => 0,
        };
        let pairs = par_paths_with(
            paths.div_ceil(2),
            seed,
            || (vec![Complex::new(0.0, 0.0); m], vec![Complex::new(0.0, 0.0); scratch_len], vec![0.0; self.n], vec![0.0; self.n]),
            |rng, (buf, scratch, a, b)| {
                self.draw_pair(rng, buf, scratch, a, b);
                (f(a), f(b))
            },
        );
        pairs.into_iter().flat_map(|(x, y)| [x, y]).take(paths).collect()
    }

    /// Stores `paths` paths.
    pub fn sample(&self, paths: usize, seed: u64) -> Result<FgnPaths> {
        if paths.saturating_mul(self.n) > MAX_VALUES {
            return Err(Error::CapExceeded(format!("{paths} x {} values > {MAX_VALUES}", self.n)));
        }
        let rows = self.map_paths(paths, seed, |p| p.to_vec());
        Ok(FgnPaths { n: self.n, data: rows.concat() })
    }
}

/// Convenience wrapper: `paths` fGn paths of length `n`.
pub fn simulate_fgn(hurst: f64, n: usize, paths: usize, seed: u64) -> Result<FgnPaths> {
    FgnGenerator::new(hurst, n)?.sample(paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn autocov(p: &FgnPaths, lag: usize) -> crate::stats::Estimate {
        let per: Vec<f64> = (0..p.len())
            .map(|i| {
                let x = p.path(i);
                (0..p.n - lag).map(|s| x[s] * x[s + lag]).sum::<f64>() / (p.n - lag) as f64
            })
            .collect();
        mean_se(&per)
    }

    #[test]
    fn half_is_white_noise() {
        let g = FgnGenerator::new(0.5, 64).unwrap();
        assert_eq!(g.method(), FgnMethod::Circulant);
        let p = g.sample(4000, 1).unwrap();
        for lag in 0..4 {
            let e = autocov(&p, lag);
            let want = if lag == 0 { 1.0 } else { 0.0 };
            assert!(e.covers(want, 4.0, 0.0), "lag {lag}: {e:?}");
        }
    }

    #[test]
    fn autocovariance_matches_closed_form() {
        for method in [FgnMethod::Circulant, FgnMethod::Cholesky] {
            let g = match method {
                FgnMethod::Circulant => FgnGenerator::circulant(0.7, 128),
                FgnMethod::Cholesky => FgnGenerator::cholesky(0.7, 128),
            }
            .unwrap();
            let p = g.sample(10_000, 2).unwrap();
            for lag in 1..=5 {
                let e = autocov(&p, lag);
                assert!(e.covers(fgn_covariance(0.7, lag as f64), 4.0, 0.0), "{method:?} lag {lag}: {e:?}");
            }
        }
    }

    #[test]
    fn caps() {
        assert!(matches!(FgnGenerator::new(0.7, MAX_STEPS + 1), Err(Error::CapExceeded(_))));
        assert!(matches!(FgnGenerator::new(0.7, 4096).unwrap().sample(10_000, 0), Err(Error::CapExceeded(_))));
        assert!(matches!(simulate_fgn(1.2, 8, 2, 0), Err(Error::DomainError(_))));
    }

    #[test]
    fn odd_path_counts_and_thread_independence() {
        let g = FgnGenerator::new(0.8, 32).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| g.map_paths(1001, 5, |p| p.iter().sum::<f64>()))
        };
        let a = run(1);
        assert_eq!(a.len(), 1001);
        assert_eq!(a, run(3));
    }
}
