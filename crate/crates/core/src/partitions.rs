//! Set partitions of `{0, .., m-1}` and the indicators built from them.
//!
//! Elements are 0-based internally; [`Partition::from_one_based`] accepts the
//! usual `{1, .., m}` labelling.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};
use crate::math;
use crate::testfn::TestFunction;

pub const MAX_M: usize = 12;

/// A set partition stored as a restricted growth string: `labels[i]` is the
/// block of element `i`, and blocks are numbered by their least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<u8>,
}

impl Partition {
    /// From blocks of 0-based elements.
    pub fn from_blocks(m: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut owner = alloc::vec![usize::MAX; m];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                bail!(InvalidParameter, "empty block");
            }
            for &e in block {
                if e >= m {
                    bail!(InvalidParameter, "element {e} outside 0..{m}");
                }
                if owner[e] != usize::MAX {
                    bail!(InvalidParameter, "element {e} appears twice");
                }
                owner[e] = b;
            }
        }
        if owner.iter().any(|&o| o == usize::MAX) {
            bail!(InvalidParameter, "blocks do not cover 0..{m}");
        }
        Ok(Self::canonical(&owner))
    }

    /// From blocks of 1-based elements.
    pub fn from_one_based(m: usize, blocks: &[&[usize]]) -> Result<Self> {
        let b: Vec<Vec<usize>> = blocks.iter().map(|bl| bl.iter().map(|&e| e.wrapping_sub(1)).collect()).collect();
        Self::from_blocks(m, &b)
    }

    fn canonical(owner: &[usize]) -> Self {
        let mut map: Vec<(usize, u8)> = Vec::new();
        let labels = owner
            .iter()
            .map(|&o| match map.iter().find(|(k, _)| *k == o) {
                Some(&(_, l)) => l,
                None => {
                    let l = map.len() as u8;
                    map.push((o, l));
                    l
                }
            })
            .collect();
        Self { labels }
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn block_count(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Block index of each element.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Blocks in canonical order, each sorted.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.block_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = alloc::vec![0; self.block_count()];
        for &l in &self.labels {
            out[l as usize] += 1;
        }
        out
    }

    /// No block is a singleton.
    pub fn is_nonisolating(&self) -> bool {
        self.block_sizes().iter().all(|&s| s >= 2)
    }

    /// `n_i = n_j` exactly when `i` and `j` share a block.
    pub fn chi_distinct(&self, n: &[i64]) -> bool {
        assert_eq!(n.len(), self.m());
        for i in 0..n.len() {
            for j in i + 1..n.len() {
                if (self.labels[i] == self.labels[j]) != (n[i] == n[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Every block has constant `h` and `r` summing to zero (signs folded into `r`).
    pub fn chi_adjusted(&self, r: &[i64], h: &[i64]) -> Result<bool> {
        if r.len() != self.m() || h.len() != self.m() {
            bail!(InvalidParameter, "vectors must have length {}", self.m());
        }
        if r.iter().any(|&x| x == 0) {
            bail!(InvalidParameter, "r entries must be nonzero");
        }
        for block in self.blocks() {
            let h0 = h[block[0]];
            if block.iter().any(|&i| h[i] != h0) {
                return Ok(false);
            }
            if block.iter().map(|&i| r[i]).sum::<i64>() != 0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `prod over blocks of E(f^|block|)`, with moments supplied by `moment`.
    pub fn target_with<F: FnMut(usize) -> f64>(&self, mut moment: F) -> f64 {
        self.block_sizes().iter().map(|&s| moment(s)).product()
    }

    /// `prod over blocks of E(f^|block|)`.
    pub fn target(&self, f: &TestFunction) -> f64 {
        self.target_with(|j| f.moment(j).unwrap_or(f64::NAN))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "{{")?;
        for (b, block) in self.blocks().iter().enumerate() {
            if b > 0 {
                write!(fm, ",")?;
            }
            write!(fm, "{{")?;
            for (i, e) in block.iter().enumerate() {
                if i > 0 {
                    write!(fm, ",")?;
                }
                write!(fm, "{}", e + 1)?;
            }
            write!(fm, "}}")?;
        }
        write!(fm, "}}")
    }
}

/// Iterator over restricted growth strings in lexicographic order.
pub struct PartitionIter {
    cur: Option<Vec<u8>>,
    max: Vec<u8>,
}

impl PartitionIter {
    pub fn new(m: usize) -> Self {
        Self { cur: Some(alloc::vec![0; m]), max: alloc::vec![0; m] }
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;
    fn next(&mut self) -> Option<Partition> {
        let cur = self.cur.as_mut()?;
        let out = Partition { labels: cur.clone() };
        let m = cur.len();
        // max[i] = max(labels[0..i]) for i >= 1
        for i in 1..m {
            self.max[i] = self.max[i - 1].max(cur[i - 1]);
        }
        let mut i = m;
        loop {
            if i <= 1 {
                self.cur = None;
                break;
            }
            i -= 1;
            if cur[i] <= self.max[i] {
                cur[i] += 1;
                for j in i + 1..m {
                    cur[j] = 0;
                }
                break;
            }
        }
        Some(out)
    }
}

/// All set partitions of an m-set in canonical order.
pub fn enumerate(m: usize) -> Result<Vec<Partition>> {
    if m == 0 || m > MAX_M {
        bail!(InvalidParameter, "m must lie in 1..={MAX_M}, got {m}");
    }
    Ok(PartitionIter::new(m).collect())
}

/// Bell numbers via the Bell triangle.
pub fn bell(m: usize) -> u64 {
    let mut row = alloc::vec![1u64];
    for _ in 0..m {
        let mut next = alloc::vec![*row.last().unwrap()];
        for &x in &row {
            let v = *next.last().unwrap() + x;
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// `sum over all partitions of prod E(f^|block|)`.
pub fn poissonian_target_with<F: FnMut(usize) -> f64>(m: usize, mut moment: F) -> Result<f64> {
    let mom: Vec<f64> = (1..=m).map(&mut moment).collect();
    Ok(PartitionIter::new(m).map(|p| p.target_with(|j| mom[j - 1])).sum())
}

pub fn poissonian_target(f: &TestFunction, m: usize) -> Result<f64> {
    if m == 0 || m > MAX_M {
        bail!(InvalidParameter, "m must lie in 1..={MAX_M}, got {m}");
    }
    let mut mom = Vec::with_capacity(m);
    for j in 1..=m {
        mom.push(f.moment(j)?);
    }
    poissonian_target_with(m, |j| mom[j - 1])
}

/// `sum over pairwise distinct indices a_1..a_d of prod_b v[a_b]^{e_b}`, given
/// the power sums `p[e] = sum_a v[a]^e` for `e <= sum e_b`.
///
/// Uses Mobius inversion on the lattice of set partitions of the `d` slots.
pub fn distinct_power_sum(exps: &[usize], p: &[f64]) -> f64 {
    let d = exps.len();
    if d == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for sigma in PartitionIter::new(d) {
        let mut term = 1.0;
        let mut merged = alloc::vec![0usize; sigma.block_count()];
        for (i, &l) in sigma.labels().iter().enumerate() {
            merged[l as usize] += exps[i];
        }
        for (c, &e) in merged.iter().enumerate() {
            let size = sigma.labels().iter().filter(|&&l| l as usize == c).count();
            let mu = if size % 2 == 1 { 1.0 } else { -1.0 } * math::factorial(size - 1);
            term *= mu * p[e];
        }
        total += term;
    }
    total
}
