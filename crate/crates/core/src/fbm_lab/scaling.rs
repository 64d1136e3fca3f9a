//! Growth of `L(T) = T^{-PH} int_{[0,T]^P} prod_{i<j} |C(s_i - s_j)|^{e_ij} ds`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generator::fgn_covariance;
use crate::error::{Error, Result};
use crate::stats::ls_slope;

const MAX_POINTS: usize = 1 << 22;

/// Exponents `e_ij` on pairs of `P` variables; absent pairs have exponent 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentGraph {
    pub p: usize,
    pub edges: Vec<(usize, usize, u32)>,
}

impl ExponentGraph {
    pub fn new(p: usize, edges: Vec<(usize, usize, u32)>) -> Result<Self> {
        if ![4, 6, 8].contains(&p) {
            return Err(Error::InvalidParams(format!("P = {p}, expected 4, 6 or 8")));
        }
        if edges.iter().any(|&(i, j, _)| i >= p || j >= p || i == j) {
            return Err(Error::InvalidParams("edge endpoints must be distinct variables below P".into()));
        }
        let g = Self { p, edges: edges.into_iter().filter(|e| e.2 > 0).collect() };
        if 2 * g.s() < p as u32 {
            return Err(Error::InvalidParams(format!("S = {} < P/2", g.s())));
        }
        Ok(g)
    }

    pub fn s(&self) -> u32 {
        self.edges.iter().map(|e| e.2).sum()
    }

    /// Unit exponents, no cycle, no isolated variable.
    pub fn is_covering_forest(&self) -> bool {
        if self.edges.iter().any(|e| e.2 != 1) {
            return false;
        }
        let mut parent: Vec<usize> = (0..self.p).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut degree = vec![0; self.p];
        for &(i, j, _) in &self.edges {
            degree[i] += 1;
            degree[j] += 1;
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        degree.iter().all(|&d| d > 0)
    }

    /// `-(1 - H)(2S - P)`
    pub fn envelope(&self, hurst: f64) -> f64 {
        -(1.0 - hurst) * (2.0 * self.s() as f64 - self.p as f64)
    }
}

/// A random forest of unit edges covering all `p` variables.
pub fn random_forest_exponents(p: usize, rng: &mut impl Rng) -> Result<ExponentGraph> {
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    let mut rest = &order[..];
    while !rest.is_empty() {
        let size = if rest.len() <= 3 { rest.len() } else { rng.random_range(2..=rest.len() - 2) };
        let (tree, tail) = rest.split_at(size);
        for k in 1..tree.len() {
            edges.push((tree[rng.random_range(0..k)], tree[k], 1));
        }
        rest = tail;
    }
    ExponentGraph::new(p, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `S > P/2`: `L(T) -> 0`
    Decays,
    /// `S = P/2`: `L(T)` bounded
    Bounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LtProbe {
    pub hurst: f64,
    pub graph: ExponentGraph,
    pub t_list: Vec<f64>,
    pub values: Vec<f64>,
    /// least-squares slope of `ln L` on `ln T`
    pub slope: f64,
    pub envelope: f64,
    pub regime: Regime,
}

impl LtProbe {
    /// Slope at most `envelope + delta`; in the bounded regime also at least
    /// `-delta`.
    pub fn respects_envelope(&self, delta: f64) -> bool {
        let upper = self.slope <= self.envelope + delta;
        match self.regime {
            Regime::Decays => upper,
            Regime::Bounded => upper && self.slope >= -delta,
        }
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `k` in base `b`.
fn radical_inverse(mut k: u64, b: u64) -> f64 {
    let (mut out, mut f) = (0.0, 1.0 / b as f64);
    while k > 0 {
        out += f * (k % b) as f64;
        k /= b;
        f /= b as f64;
    }
    out
}

/// Quasi Monte Carlo estimate of `L(T)` on each `T` from the first
/// `points` Halton nodes.
pub fn lt_scaling_probe(hurst: f64, graph: &ExponentGraph, t_list: &[f64], points: usize) -> Result<LtProbe> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::DomainError(format!("Hurst index {hurst} outside (1/2, 1)")));
    }
    if points == 0 || points > MAX_POINTS {
        return Err(Error::CapExceeded(format!("{points} quadrature points, allowed 1..={MAX_POINTS}")));
    }
    if t_list.len() < 2 || t_list.iter().any(|&t| !(t > 1.0)) {
        return Err(Error::InvalidParams("need at least two horizons T > 1".into()));
    }
    let p = graph.p;
    let values = t_list
        .iter()
        .map(|&t| {
            let mut s = vec![0.0; p];
            let mut acc = 0.0;
            for k in 1..=points as u64 {
                for (si, &b) in s.iter_mut().zip(&PRIMES) {
                    *si = t * radical_inverse(k, b);
                }
                acc += graph.edges.iter().map(|&(i, j, e)| fgn_covariance(hurst, s[i] - s[j]).abs().powi(e as i32)).product::<f64>();
            }
            // T^P volume times the mean, scaled by T^{-PH}
            acc / points as f64 * t.powf(p as f64 * (1.0 - hurst))
        })
        .collect::<Vec<f64>>();
    let lx: Vec<f64> = t_list.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let regime = if 2 * graph.s() > p as u32 { Regime::Decays } else { Regime::Bounded };
    Ok(LtProbe {
        hurst,
        graph: graph.clone(),
        t_list: t_list.to_vec(),
        slope: ls_slope(&lx, &ly),
        envelope: graph.envelope(hurst),
        values,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::block_rng;

    const TS: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

    #[test]
    fn matching_is_bounded() {
        let g = ExponentGraph::new(4, vec![(0, 1, 1), (2, 3, 1)]).unwrap();
        let probe = lt_scaling_probe(0.7, &g, &TS, 1 << 16).unwrap();
        assert_eq!(probe.regime, Regime::Bounded);
        assert!(probe.respects_envelope(0.1), "{probe:?}");
    }

    #[test]
    fn spanning_tree_decays() {
        let g = ExponentGraph::new(4, vec![(0, 1, 1), (1, 2, 1), (1, 3, 1)]).unwrap();
        let probe = lt_scaling_probe(0.7, &g, &TS, 1 << 16).unwrap();
        assert_eq!(probe.regime, Regime::Decays);
        assert!((probe.envelope + 0.6).abs() < 1e-12);
        assert!(probe.respects_envelope(0.1), "{probe:?}");
    }

    #[test]
    fn random_forests_cover_all_variables() {
        let mut rng = block_rng(8, 0);
        for p in [4, 6, 8] {
            for _ in 0..20 {
                let g = random_forest_exponents(p, &mut rng).unwrap();
                assert!(g.is_covering_forest(), "{g:?}");
                assert!(2 * g.s() >= p as u32);
            }
        }
    }

    #[test]
    fn degenerate_exponents_rejected() {
        assert!(ExponentGraph::new(4, vec![]).is_err());
        assert!(ExponentGraph::new(4, vec![(0, 1, 1)]).is_err());
        assert!(ExponentGraph::new(5, vec![(0, 1, 3)]).is_err());
        assert!(!ExponentGraph::new(4, vec![(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap().is_covering_forest());
    }
}
