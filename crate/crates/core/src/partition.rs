//! Non-crossing, interval and non-crossing pair partitions of `{1..n}`.
//!
//! Partitions are stored as restricted growth strings: `labels[i]` is the
//! index of the block containing element `i + 1`, with blocks numbered in
//! order of their minima. Enumeration is lexicographic in that string, so
//! every sum over a lattice sees partitions in a fixed order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest ground set accepted by [`enumerate`].
pub const MAX_N: usize = 16;

/// The three partition lattices used by the cumulant formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionClass {
    /// `NC(n)`.
    Noncrossing,
    /// `I(n)`: every block is a run of consecutive integers.
    Interval,
    /// `NC₂(n)`: non-crossing partitions whose blocks all have two elements.
    NoncrossingPair,
}

impl std::str::FromStr for PartitionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noncrossing" | "nc" => Ok(Self::Noncrossing),
            "interval" => Ok(Self::Interval),
            "noncrossing-pair" | "pair" => Ok(Self::NoncrossingPair),
            other => Err(invalid(format!("unknown partition class `{other}`"))),
        }
    }
}

/// A set partition of `{1..n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<u8>,
}

impl Partition {
    /// Builds a partition from explicit 1-based blocks.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        if n == 0 || n > 255 {
            return Err(invalid(format!("ground set size {n} out of range")));
        }
        let mut owner = vec![usize::MAX; n];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(invalid("empty block"));
            }
            for &e in block {
                if e == 0 || e > n {
                    return Err(invalid(format!("element {e} outside 1..={n}")));
                }
                if owner[e - 1] != usize::MAX {
                    return Err(invalid(format!("element {e} appears twice")));
                }
                owner[e - 1] = k;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(invalid("blocks do not cover the ground set"));
        }
        // Relabel blocks by order of first appearance.
        let mut relabel = vec![u8::MAX; blocks.len()];
        let mut next = 0u8;
        let labels = owner
            .iter()
            .map(|&k| {
                if relabel[k] == u8::MAX {
                    relabel[k] = next;
                    next += 1;
                }
                relabel[k]
            })
            .collect();
        Ok(Self { labels })
    }

    /// The one-block partition `1_n`.
    pub fn full(n: usize) -> Self {
        Self { labels: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Block index of each element (0-based elements and blocks).
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn block_count(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Blocks as sorted lists of 1-based elements, ordered by minimum.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.block_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l as usize].push(i + 1);
        }
        blocks
    }

    pub fn is_full(&self) -> bool {
        self.labels.iter().all(|&l| l == 0)
    }

    /// True iff no `a < b < c < d` has `a, c` in one block and `b, d` in another.
    pub fn is_noncrossing(&self) -> bool {
        let blocks = self.blocks();
        for (p, v) in blocks.iter().enumerate() {
            for w in blocks.iter().skip(p + 1) {
                if crosses(v, w) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_interval(&self) -> bool {
        self.labels.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1)
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks().iter().all(|b| b.len() == 2)
    }

    /// `τ(π)! = ∏_V |{W ∈ π : W ⊆ [min V, max V]}|`.
    pub fn tau_factorial(&self) -> Result<u64> {
        if !self.is_noncrossing() {
            return Err(invalid("τ(π)! is only defined for non-crossing partitions"));
        }
        let blocks = self.blocks();
        let spans: Vec<(usize, usize)> = blocks.iter().map(|b| (b[0], *b.last().unwrap())).collect();
        Ok(spans
            .iter()
            .map(|&(lo, hi)| spans.iter().filter(|&&(a, b)| lo <= a && b <= hi).count() as u64)
            .product())
    }
}

fn crosses(v: &[usize], w: &[usize]) -> bool {
    // Some w-element lies strictly inside a gap of v while another lies outside it.
    for gap in v.windows(2) {
        let (lo, hi) = (gap[0], gap[1]);
        let inside = w.iter().any(|&e| lo < e && e < hi);
        let outside = w.iter().any(|&e| e < lo || e > hi);
        if inside && outside {
            return true;
        }
    }
    false
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, block) in self.blocks().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, e) in block.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// Lazily enumerates a partition lattice in lexicographic order of the
/// restricted growth string (equivalently, by block minima).
pub fn enumerate(n: usize, class: PartitionClass) -> Result<Partitions> {
    if n == 0 || n > MAX_N {
        return Err(Error::SizeLimit {
            what: "partition ground set",
            got: n,
            max: MAX_N,
        });
    }
    Ok(Partitions {
        n,
        class,
        labels: Vec::with_capacity(n),
        started: false,
        done: class == PartitionClass::NoncrossingPair && n % 2 == 1,
    })
}

/// Number of partitions in a lattice, counted by enumeration.
pub fn count(n: usize, class: PartitionClass) -> Result<usize> {
    Ok(enumerate(n, class)?.count())
}

/// Iterator returned by [`enumerate`].
#[derive(Clone, Debug)]
pub struct Partitions {
    n: usize,
    class: PartitionClass,
    labels: Vec<u8>,
    started: bool,
    done: bool,
}

impl Partitions {
    /// Admissible labels for the next element given the current prefix,
    /// in increasing order.
    fn options(&self, prefix: &[u8]) -> Vec<u8> {
        let next_label = prefix.iter().map(|&l| l + 1).max().unwrap_or(0);
        match self.class {
            PartitionClass::Interval => match prefix.last() {
                None => vec![0],
                Some(&last) => vec![last, next_label],
            },
            PartitionClass::Noncrossing | PartitionClass::NoncrossingPair => {
                let pairs = self.class == PartitionClass::NoncrossingPair;
                // Stack of blocks that may still receive elements.
                let mut open: Vec<u8> = Vec::new();
                let mut size = vec![0usize; next_label as usize];
                for &l in prefix {
                    size[l as usize] += 1;
                    if let Some(pos) = open.iter().position(|&o| o == l) {
                        open.truncate(pos + 1);
                    } else {
                        open.push(l);
                    }
                    if pairs && size[l as usize] == 2 {
                        open.pop();
                    }
                }
                let mut opts = if pairs {
                    open.last().copied().into_iter().collect()
                } else {
                    open.clone()
                };
                let remaining = self.n - prefix.len();
                if !pairs || open.len() + 1 < remaining {
                    opts.push(next_label);
                }
                opts
            }
        }
    }

    fn fill_from(&mut self, start: usize) {
        self.labels.truncate(start);
        while self.labels.len() < self.n {
            let opts = self.options(&self.labels);
            self.labels.push(opts[0]);
        }
    }

    fn advance(&mut self) -> bool {
        for i in (0..self.n).rev() {
            let opts = self.options(&self.labels[..i]);
            let current = self.labels[i];
            if let Some(&next) = opts.iter().find(|&&o| o > current) {
                self.labels[i] = next;
                self.fill_from(i + 1);
                return true;
            }
        }
        false
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_from(0);
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(Partition {
            labels: self.labels.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalan(m: usize) -> usize {
        (0..m).fold(1usize, |c, k| c * 2 * (2 * k + 1) / (k + 2))
    }

    /// Brute-force oracle: all restricted growth strings, filtered.
    fn all_partitions(n: usize) -> Vec<Partition> {
        let mut out = Vec::new();
        let mut labels = vec![0u8; n];
        fn rec(i: usize, max: u8, labels: &mut Vec<u8>, out: &mut Vec<Partition>) {
            if i == labels.len() {
                out.push(Partition { labels: labels.clone() });
                return;
            }
            for l in 0..=max + 1 {
                labels[i] = l;
                rec(i + 1, max.max(l), labels, out);
            }
        }
        if n == 1 {
            return vec![Partition::full(1)];
        }
        rec(1, 0, &mut labels, &mut out);
        out
    }

    #[test]
    fn counts_match_closed_forms() {
        for n in 1..=10 {
            assert_eq!(count(n, PartitionClass::Noncrossing).unwrap(), catalan(n));
            assert_eq!(count(n, PartitionClass::Interval).unwrap(), 1 << (n - 1));
        }
        for m in 1..=7 {
            assert_eq!(count(2 * m, PartitionClass::NoncrossingPair).unwrap(), catalan(m));
            assert_eq!(count(2 * m - 1, PartitionClass::NoncrossingPair).unwrap(), 0);
        }
    }

    #[test]
    fn enumeration_matches_brute_force_filter() {
        for n in 1..=8 {
            let brute = all_partitions(n);
            let nc: Vec<_> = brute.iter().filter(|p| p.is_noncrossing()).cloned().collect();
            let got: Vec<_> = enumerate(n, PartitionClass::Noncrossing).unwrap().collect();
            assert_eq!(got, nc, "NC({n})");
            let int: Vec<_> = brute.iter().filter(|p| p.is_interval()).cloned().collect();
            assert_eq!(enumerate(n, PartitionClass::Interval).unwrap().collect::<Vec<_>>(), int);
            let pairs: Vec<_> = nc.iter().filter(|p| p.is_pairing()).cloned().collect();
            assert_eq!(enumerate(n, PartitionClass::NoncrossingPair).unwrap().collect::<Vec<_>>(), pairs);
        }
    }

    #[test]
    fn four_point_pairings() {
        let got: Vec<_> = enumerate(4, PartitionClass::NoncrossingPair)
            .unwrap()
            .map(|p| p.blocks())
            .collect();
        assert_eq!(got, vec![vec![vec![1, 2], vec![3, 4]], vec![vec![1, 4], vec![2, 3]]]);
    }

    #[test]
    fn tau_examples() {
        let p = |b: &[Vec<usize>]| Partition::from_blocks(4, b).unwrap();
        assert_eq!(p(&[vec![1, 2], vec![3, 4]]).tau_factorial().unwrap(), 1);
        assert_eq!(p(&[vec![1, 4], vec![2, 3]]).tau_factorial().unwrap(), 2);
        assert_eq!(Partition::full(7).tau_factorial().unwrap(), 1);
        assert!(p(&[vec![1, 3], vec![2, 4]]).tau_factorial().is_err());
    }

    /// Direct count of nested blocks, written independently of `tau_factorial`.
    fn tau_oracle(p: &Partition) -> u64 {
        let blocks = p.blocks();
        let mut prod = 1u64;
        for v in &blocks {
            let span: Vec<usize> = (v[0]..=*v.last().unwrap()).collect();
            let nested = blocks.iter().filter(|w| w.iter().all(|e| span.contains(e))).count();
            prod *= nested as u64;
        }
        prod
    }

    #[test]
    fn tau_matches_oracle_and_divides_factorial_on_intervals() {
        for n in 1..=8 {
            for p in enumerate(n, PartitionClass::Noncrossing).unwrap() {
                assert_eq!(p.tau_factorial().unwrap(), tau_oracle(&p));
            }
            for p in enumerate(n, PartitionClass::Interval).unwrap() {
                let k = p.block_count() as u64;
                let fact: u64 = (1..=k).product();
                assert_eq!(fact % p.tau_factorial().unwrap(), 0);
            }
        }
    }

    #[test]
    fn crossing_predicate() {
        let p = |n, b: &[Vec<usize>]| Partition::from_blocks(n, b).unwrap();
        assert!(!p(4, &[vec![1, 3], vec![2, 4]]).is_noncrossing());
        assert!(p(4, &[vec![1, 4], vec![2, 3]]).is_noncrossing());
        assert!(p(3, &[vec![1], vec![2], vec![3]]).is_noncrossing());
    }

    #[test]
    fn size_guard() {
        assert!(matches!(enumerate(17, PartitionClass::Interval), Err(Error::SizeLimit { .. })));
        assert!(enumerate(0, PartitionClass::Interval).is_err());
    }

    #[test]
    fn display_is_one_based() {
        let p = Partition::from_blocks(3, &[vec![1, 3], vec![2]]).unwrap();
        assert_eq!(p.to_string(), "{{1,3},{2}}");
    }
}
