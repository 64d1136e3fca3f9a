//! Contractions `f (x)_r^s g`.
//!
//! `r` variables are integrated out against `mu` and `s` further variables
//! are shared, each shared cell contributing its jump size `x`. On grids
//! without jump cells every `s > 0` contraction vanishes and `s = 0` is the
//! ordinary Wiener contraction.

use std::sync::Arc;

use super::index::{arrangements, factorial, rank, rank_union, MultisetIndex};
use super::kernel::{GridMeasure, SymmetricKernel};
use crate::error::{Error, Result};

const MAX_WORK: usize = 1 << 26;
/// streamed norms skip zero rows, so sparse kernels stay cheap at this size
const STREAM_WORK: usize = 1 << 28;

/// `h(z, a, b)`, symmetric inside each of the three argument groups.
#[derive(Debug, Clone)]
pub struct Contraction {
    pub grid: Arc<GridMeasure>,
    pub r: usize,
    pub s: usize,
    /// sizes of the shared, left-only and right-only groups
    pub dims: (usize, usize, usize),
    lens: (usize, usize, usize),
    data: Vec<f64>,
}

impl Contraction {
    pub fn order(&self) -> usize {
        self.dims.0 + self.dims.1 + self.dims.2
    }

    /// Value at sorted group tuples.
    pub fn get(&self, z: &[u16], a: &[u16], b: &[u16]) -> f64 {
        self.data[(rank(z) * self.lens.1 + rank(a)) * self.lens.2 + rank(b)]
    }

    /// Norm in `L^2(mu^{order})` of the unsymmetrized contraction.
    pub fn norm(&self) -> f64 {
        let n = self.grid.len();
        let w = |q| -> Vec<f64> {
            MultisetIndex::new(n, q).iter().map(|t| arrangements(t) * self.grid.weight(t)).collect()
        };
        let (wz, wa, wb) = (w(self.dims.0), w(self.dims.1), w(self.dims.2));
        let mut s = 0.0;
        for (iz, cz) in wz.iter().enumerate() {
            for (ia, ca) in wa.iter().enumerate() {
                let row = &self.data[(iz * self.lens.1 + ia) * self.lens.2..][..self.lens.2];
                s += cz * ca * row.iter().zip(&wb).map(|(h, cb)| h * h * cb).sum::<f64>();
            }
        }
        s.sqrt()
    }

    /// Symmetrization over all arguments.
    pub fn symmetrize(&self) -> Result<SymmetricKernel> {
        let (ls, la, lb) = self.dims;
        let m = self.order();
        let total = factorial(m) / (factorial(ls) * factorial(la) * factorial(lb));
        let mut groups: [Vec<u16>; 3] = Default::default();
        SymmetricKernel::from_fn(&self.grid, m, |t| {
            let runs = super::index::multiplicities(t);
            let mut acc = 0.0;
            self.splits(&runs, 0, [ls, la, lb], 1.0, &mut groups, &mut acc);
            acc / total
        })
    }

    fn splits(&self, runs: &[(u16, u8)], i: usize, left: [usize; 3], w: f64, groups: &mut [Vec<u16>; 3], acc: &mut f64) {
        if i == runs.len() {
            *acc += w * self.get(&groups[0], &groups[1], &groups[2]);
            return;
        }
        let (v, m) = (runs[i].0, runs[i].1 as usize);
        for kz in 0..=m.min(left[0]) {
            for ka in 0..=(m - kz).min(left[1]) {
                let kb = m - kz - ka;
                if kb > left[2] {
                    continue;
                }
                let ways = factorial(m) / (factorial(kz) * factorial(ka) * factorial(kb));
                let marks = [groups[0].len(), groups[1].len(), groups[2].len()];
                groups[0].extend(std::iter::repeat_n(v, kz));
                groups[1].extend(std::iter::repeat_n(v, ka));
                groups[2].extend(std::iter::repeat_n(v, kb));
                self.splits(runs, i + 1, [left[0] - kz, left[1] - ka, left[2] - kb], w * ways, groups, acc);
                for (g, mk) in groups.iter_mut().zip(marks) {
                    g.truncate(mk);
                }
            }
        }
    }
}

/// `f (x)_r g` integrating out `r` variables.
pub fn contract(f: &SymmetricKernel, g: &SymmetricKernel, r: usize) -> Result<Contraction> {
    contract_ws(f, g, r, 0)
}

/// `f (x)_r^s g`: integrate out `r` variables and share `s` more.
///
/// # Errors
/// [`Error::RankError`] unless `r <= min(p, q)` and `s <= min(p, q) - r`.
pub fn contract_ws(f: &SymmetricKernel, g: &SymmetricKernel, r: usize, s: usize) -> Result<Contraction> {
    let (p, q) = (f.order(), g.order());
    let grid = f.grid().clone();
    let mut data = Vec::new();
    let lens = visit_slabs(f, g, r, s, true, |_, slab| data.extend_from_slice(slab))?;
    Ok(Contraction { grid, r, s, dims: (s, p - r - s, q - r - s), lens, data })
}

/// `||f (x)_r^s g||` without storing the contraction, so the shared and
/// free groups may be larger than [`contract_ws`] allows.
pub fn contraction_norm_ws(f: &SymmetricKernel, g: &SymmetricKernel, r: usize, s: usize) -> Result<f64> {
    let grid = f.grid().clone();
    let n = grid.len();
    let w = |q| -> Vec<f64> { MultisetIndex::new(n, q).iter().map(|t| arrangements(t) * grid.weight(t)).collect() };
    let (p, q) = (f.order(), g.order());
    if r > p.min(q) || s > p.min(q) - r {
        return Err(Error::RankError { r: r + s, max: p.min(q) });
    }
    let (wz, wa, wb) = (w(s), w(p - r - s), w(q - r - s));
    let mut acc = 0.0;
    visit_slabs(f, g, r, s, false, |kz, slab| {
        let mut t = 0.0;
        for (ia, row) in slab.chunks(wb.len()).enumerate() {
            t += wa[ia] * row.iter().zip(&wb).map(|(h, cb)| h * h * cb).sum::<f64>();
        }
        acc += wz[kz] * t;
    })?;
    Ok(acc.sqrt())
}

/// Calls `visit(kz, slab)` for each shared multiset `z` in rank order, where
/// `slab[ka * len_b + kb] = h(z, a, b)`. Returns the group lengths.
fn visit_slabs(
    f: &SymmetricKernel,
    g: &SymmetricKernel,
    r: usize,
    s: usize,
    dense: bool,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<(usize, usize, usize)> {
    let (p, q) = (f.order(), g.order());
    let max = p.min(q);
    if r > max {
        return Err(Error::RankError { r, max });
    }
    if s > max - r {
        return Err(Error::RankError { r: r + s, max });
    }
    let grid = f.grid().clone();
    if *grid != **g.grid() {
        return Err(Error::InvalidParams("kernels live on different grids".into()));
    }
    let n = grid.len();
    let (iz, ia, ib, ic) = (
        MultisetIndex::new(n, s),
        MultisetIndex::new(n, p - r - s),
        MultisetIndex::new(n, q - r - s),
        MultisetIndex::new(n, r),
    );
    let lens = (iz.len(), ia.len(), ib.len());
    let nc = ic.len();
    let work = lens.0 * lens.1 * lens.2 * nc;
    let stored = if dense { lens.0 * lens.1 * lens.2 } else { lens.1 * lens.2 };
    let limit = if dense { MAX_WORK } else { STREAM_WORK };
    if work > limit || stored > MAX_WORK / 4 {
        return Err(Error::CapExceeded(format!("contraction work {work}")));
    }
    let wc: Vec<f64> = ic.iter().map(|c| arrangements(c) * grid.weight(c)).collect();
    let mut slab = vec![0.0; lens.1 * lens.2];
    let mut buf = Vec::new();
    let mut fa = vec![0.0; lens.1 * nc];
    let mut gb = vec![0.0; lens.2 * nc];
    for (kz, z) in iz.iter().enumerate() {
        slab.fill(0.0);
        let xz: f64 = z.iter().map(|&i| grid.jumps[i as usize]).product();
        if xz != 0.0 {
            for (ka, a) in ia.iter().enumerate() {
                for (kc, c) in ic.iter().enumerate() {
                    fa[ka * nc + kc] = f.coeffs()[rank_union(&[c, z, a], &mut buf)];
                }
            }
            for (kb, b) in ib.iter().enumerate() {
                for (kc, c) in ic.iter().enumerate() {
                    gb[kb * nc + kc] = g.coeffs()[rank_union(&[c, z, b], &mut buf)] * wc[kc];
                }
            }
            for ka in 0..lens.1 {
                let fr = &fa[ka * nc..(ka + 1) * nc];
                if fr.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for kb in 0..lens.2 {
                    let gr = &gb[kb * nc..(kb + 1) * nc];
                    let dot: f64 = fr.iter().zip(gr).map(|(x, y)| x * y).sum();
                    slab[ka * lens.2 + kb] = xz * dot;
                }
            }
        }
        visit(kz, &slab);
    }
    Ok(lens)
}

/// Symmetrized `f (x)_r g`.
pub fn contract_sym(f: &SymmetricKernel, g: &SymmetricKernel, r: usize) -> Result<SymmetricKernel> {
    contract(f, g, r)?.symmetrize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_chaos::kernel::RawTensor;
    use crate::rng::block_rng;

    fn grid() -> Arc<GridMeasure> {
        GridMeasure::new(vec![0.4, 1.1, 0.7]).unwrap()
    }

    #[test]
    fn zero_rank_is_tensor_product() {
        let g = grid();
        let mut rng = block_rng(1, 0);
        let f = SymmetricKernel::random(&g, 1, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let c = contract(&f, &h, 0).unwrap();
        for i in 0..3u16 {
            for j in 0..3u16 {
                for k in j..3u16 {
                    assert_eq!(c.get(&[], &[i], &[j, k]), f.get(&[i as usize]) * h.get(&[j as usize, k as usize]));
                }
            }
        }
    }

    #[test]
    fn full_contraction_of_unit_vector_is_one() {
        let g = grid();
        let e = SymmetricKernel::unit(&g, 2).unwrap();
        let c = contract(&e, &e, 1).unwrap();
        assert!((c.get(&[], &[], &[]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_two_contraction_matches_brute_force() {
        let g = grid();
        let mut rng = block_rng(2, 0);
        let f = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let c = contract(&f, &h, 1).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let brute: f64 = (0..3).map(|t| f.get(&[t, a]) * h.get(&[t, b]) * g.masses[t]).sum();
                assert!((c.get(&[], &[a as u16], &[b as u16]) - brute).abs() < 1e-13);
            }
        }
        // norm against the dense expansion
        let dense = RawTensor::from_fn(&g, 2, |t| c.get(&[], &[t[0] as u16], &[t[1] as u16]));
        assert!((dense.norm() - c.norm()).abs() < 1e-12);
    }

    #[test]
    fn symmetrized_contraction_matches_dense_average() {
        let g = grid();
        let mut rng = block_rng(3, 0);
        let f = SymmetricKernel::random(&g, 3, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let c = contract(&f, &h, 1).unwrap();
        let raw = RawTensor::from_fn(&g, 3, |t| {
            let mut a = [t[0] as u16, t[1] as u16];
            a.sort();
            c.get(&[], &a, &[t[2] as u16])
        });
        let want = crate::gaussian_chaos::symmetrize(&raw, 3).unwrap();
        let got = c.symmetrize().unwrap();
        for (x, y) in want.coeffs().iter().zip(got.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_variable_on_jump_atom() {
        let g = GridMeasure::with_jumps(vec![0.5, 0.8], vec![0.0, 1.5]).unwrap();
        let mut rng = block_rng(4, 0);
        let f = SymmetricKernel::random(&g, 1, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 1, &mut rng).unwrap();
        let c = contract_ws(&f, &h, 0, 1).unwrap();
        assert_eq!(c.get(&[0], &[], &[]), 0.0);
        assert!((c.get(&[1], &[], &[]) - 1.5 * f.get(&[1]) * h.get(&[1])).abs() < 1e-15);
    }

    #[test]
    fn streamed_norm_matches_stored() {
        let g = GridMeasure::with_jumps(vec![0.4, 1.1, 0.7, 0.3], vec![0.0, 0.5, -1.2, 0.0]).unwrap();
        let mut rng = block_rng(4, 0);
        let f = SymmetricKernel::random(&g, 2, &mut rng).unwrap();
        let h = SymmetricKernel::random(&g, 3, &mut rng).unwrap();
        for (r, s) in [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (2, 0)] {
            let a = contract_ws(&f, &h, r, s).unwrap().norm();
            let b = contraction_norm_ws(&f, &h, r, s).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a), "{r} {s}: {a} {b}");
        }
    }

    #[test]
    fn rank_errors() {
        let g = grid();
        let e = SymmetricKernel::unit(&g, 0).unwrap();
        assert!(matches!(contract(&e, &e, 2), Err(Error::RankError { .. })));
        assert!(matches!(contract_ws(&e, &e, 1, 1), Err(Error::RankError { .. })));
    }
}
