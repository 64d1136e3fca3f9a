//! Ranking of multisets of grid cells.
//!
//! A sorted tuple `i_1 <= ... <= i_q` over `n` cells maps to the strictly
//! increasing `j_k = i_k + k - 1` and is ranked as `sum_k C(j_k, k)`. Ranks
//! fill `0..C(n + q - 1, q)` without gaps.

pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as usize
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Number of multisets of size `q` over `n` cells.
pub fn multiset_count(n: usize, q: usize) -> usize {
    if q == 0 {
        1
    } else if n == 0 {
        0
    } else {
        binom(n + q - 1, q)
    }
}

/// Rank of a sorted tuple.
pub fn rank(sorted: &[u16]) -> usize {
    sorted.iter().enumerate().map(|(k, &i)| binom(i as usize + k, k + 1)).sum()
}

/// Rank of the multiset union of several sorted tuples.
pub fn rank_union(parts: &[&[u16]], buf: &mut Vec<u16>) -> usize {
    buf.clear();
    for p in parts {
        buf.extend_from_slice(p);
    }
    buf.sort_unstable();
    rank(buf)
}

/// `q! / prod m_j!`: the number of ordered tuples with these entries.
pub fn arrangements(sorted: &[u16]) -> f64 {
    let mut out = factorial(sorted.len());
    let mut run = 1;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
            out /= run as f64;
        } else {
            run = 1;
        }
    }
    out
}

/// `(cell, multiplicity)` pairs of a sorted tuple.
pub fn multiplicities(sorted: &[u16]) -> Vec<(u16, u8)> {
    let mut out: Vec<(u16, u8)> = Vec::new();
    for &i in sorted {
        match out.last_mut() {
            Some((c, m)) if *c == i => *m += 1,
            _ => out.push((i, 1)),
        }
    }
    out
}

/// Every multiset of size `q` over `n` cells, stored flat in rank order.
#[derive(Debug, Clone)]
pub struct MultisetIndex {
    pub n: usize,
    pub q: usize,
    tuples: Vec<u16>,
}

impl MultisetIndex {
    pub fn new(n: usize, q: usize) -> Self {
        let len = multiset_count(n, q);
        let mut tuples = vec![0u16; len * q];
        if q > 0 && n > 0 {
            let mut cur = vec![0u16; q];
            loop {
                let r = rank(&cur);
                tuples[r * q..(r + 1) * q].copy_from_slice(&cur);
                // next non-decreasing tuple in lexicographic order
                let Some(k) = (0..q).rev().find(|&k| (cur[k] as usize) < n - 1) else { break };
                let v = cur[k] + 1;
                for c in cur[k..].iter_mut() {
                    *c = v;
                }
            }
        }
        Self { n, q, tuples }
    }

    pub fn len(&self) -> usize {
        multiset_count(self.n, self.q)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, rank: usize) -> &[u16] {
        &self.tuples[rank * self.q..(rank + 1) * self.q]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u16]> {
        (0..self.len()).map(move |r| self.get(r))
    }
}

/// Advances `v` to its next distinct permutation in lexicographic order.
pub fn next_permutation(v: &mut [u16]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else { return false };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}
