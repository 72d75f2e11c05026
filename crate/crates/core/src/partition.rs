//! Set partitions and non-crossing partitions of `[m] = {1, ..., m}`.
//!
//! Enumeration is a backtracking search that always opens a new block at the
//! least unassigned element and then grows it by increasing elements. Each
//! branch is pruned on
//!
//! * the block-size budget (the remaining points must be splittable into
//!   allowed sizes),
//! * interval respect (a block takes at most one point of every interval of
//!   the pattern),
//! * non-crossing feasibility (a block may not enclose points that already
//!   belong to earlier blocks, and each gap it leaves must be fillable on its
//!   own).
//!
//! Output is canonical: blocks sorted by least element, partitions in
//! lexicographic order of their block lists.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest ground set the enumerators accept.
pub const GROUND_CAP: usize = 24;

pub type Block = Vec<u8>;

/// A partition of `[ground]` into non-empty, pairwise disjoint blocks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    ground: usize,
    blocks: Vec<Block>,
}

impl Partition {
    /// Builds a partition from 1-based blocks, canonicalizing the order.
    pub fn new(ground: usize, blocks: Vec<Vec<u8>>) -> Result<Self> {
        if ground == 0 || ground > GROUND_CAP {
            return Err(Error::InvalidGroundSize(ground));
        }
        let mut seen = vec![false; ground + 1];
        let mut blocks = blocks;
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::InvalidPartition("empty block".into()));
            }
            b.sort_unstable();
            for &e in b.iter() {
                let e = e as usize;
                if e == 0 || e > ground {
                    return Err(Error::InvalidPartition(format!("element {e} outside [1, {ground}]")));
                }
                if seen[e] {
                    return Err(Error::InvalidPartition(format!("element {e} appears twice")));
                }
                seen[e] = true;
            }
        }
        if let Some(missing) = (1..=ground).find(|&e| !seen[e]) {
            return Err(Error::InvalidPartition(format!("element {missing} not covered")));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Partition { ground, blocks })
    }

    pub(crate) fn from_canonical(ground: usize, blocks: Vec<Block>) -> Self {
        Partition { ground, blocks }
    }

    pub fn ground_size(&self) -> usize {
        self.ground
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    /// Block label of every element, by position `0..ground`.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.ground];
        for (i, b) in self.blocks.iter().enumerate() {
            for &e in b {
                labels[e as usize - 1] = i;
            }
        }
        labels
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, e) in b.iter().enumerate() {
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

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<u8>>::deserialize(deserializer)?;
        let ground = blocks.iter().flatten().copied().max().unwrap_or(0) as usize;
        Partition::new(ground, blocks).map_err(serde::de::Error::custom)
    }
}

/// The partition of `[block_length * block_count]` into consecutive
/// intervals of length `block_length`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntervalPattern {
    pub block_length: usize,
    pub block_count: usize,
}

impl IntervalPattern {
    pub fn new(block_length: usize, block_count: usize) -> Result<Self> {
        if block_length == 0 || block_count == 0 {
            return Err(Error::InvalidGroundSize(block_length * block_count));
        }
        Ok(IntervalPattern { block_length, block_count })
    }

    pub fn ground_size(&self) -> usize {
        self.block_length * self.block_count
    }

    /// 0-based interval containing the 1-based element `e`.
    pub fn interval_of(&self, e: u8) -> usize {
        (e as usize - 1) / self.block_length
    }

    pub fn as_partition(&self) -> Partition {
        let blocks = (0..self.block_count)
            .map(|k| {
                let start = k * self.block_length + 1;
                (start..start + self.block_length).map(|e| e as u8).collect()
            })
            .collect();
        Partition::from_canonical(self.ground_size(), blocks)
    }
}

/// Allowed block sizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockProfile {
    allowed: BTreeSet<usize>,
}

impl BlockProfile {
    pub fn new<I: IntoIterator<Item = usize>>(sizes: I) -> Result<Self> {
        let allowed: BTreeSet<usize> = sizes.into_iter().collect();
        if allowed.is_empty() || allowed.contains(&0) {
            return Err(Error::InvalidProfile);
        }
        Ok(BlockProfile { allowed })
    }

    pub fn pairings() -> Self {
        BlockProfile { allowed: [2].into() }
    }

    /// Every size from 1 to `max`.
    pub fn up_to(max: usize) -> Self {
        BlockProfile { allowed: (1..=max.max(1)).collect() }
    }

    pub fn allows(&self, size: usize) -> bool {
        self.allowed.contains(&size)
    }

    pub fn max_size(&self) -> usize {
        *self.allowed.iter().next_back().expect("profile is non-empty")
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.allowed.iter().copied()
    }

    /// `reachable[r]` is true when `r` points split into allowed sizes.
    fn reachable(&self, m: usize) -> Vec<bool> {
        let mut reach = vec![false; m + 1];
        reach[0] = true;
        for r in 1..=m {
            reach[r] = self.allowed.iter().any(|&s| s <= r && reach[r - s]);
        }
        reach
    }
}

/// Search state shared by the enumerators.
struct Search<'a> {
    m: usize,
    profile: &'a BlockProfile,
    respect: Option<IntervalPattern>,
    noncrossing: bool,
    reachable: Vec<bool>,
    assigned: u32,
    blocks: Vec<Block>,
}

impl<'a> Search<'a> {
    fn new(m: usize, profile: &'a BlockProfile, respect: Option<IntervalPattern>, noncrossing: bool) -> Self {
        Search {
            m,
            profile,
            respect,
            noncrossing,
            reachable: profile.reachable(m),
            assigned: 0,
            blocks: Vec::new(),
        }
    }

    fn full(&self) -> u32 {
        if self.m == 32 {
            u32::MAX
        } else {
            (1u32 << self.m) - 1
        }
    }

    fn is_assigned(&self, e: u8) -> bool {
        self.assigned & (1 << (e - 1)) != 0
    }

    fn remaining(&self) -> usize {
        self.m - self.assigned.count_ones() as usize
    }

    fn least_unassigned(&self) -> Option<u8> {
        let free = !self.assigned & self.full();
        (free != 0).then(|| free.trailing_zeros() as u8 + 1)
    }

    fn interval_mask(&self, block: &[u8]) -> u32 {
        match self.respect {
            Some(p) => block.iter().fold(0, |acc, &e| acc | 1 << p.interval_of(e)),
            None => 0,
        }
    }

    /// Enumerates every completion of the current state.
    fn run<F: FnMut(&[Block])>(&mut self, visit: &mut F) {
        match self.least_unassigned() {
            None => visit(&self.blocks),
            Some(e) => {
                let mut block = vec![e];
                self.grow(&mut block, &mut |s: &mut Self, _b: &[u8]| s.run(visit));
            }
        }
    }

    /// Grows `block` (whose least element is the least unassigned point) and
    /// calls `on_closed` with the block committed to `self.blocks`.
    fn grow<G: FnMut(&mut Self, &[u8])>(&mut self, block: &mut Block, on_closed: &mut G) {
        let size = block.len();
        if self.profile.allows(size) && self.reachable[self.remaining() - size] {
            let mask = block.iter().fold(0, |acc, &e| acc | 1u32 << (e - 1));
            self.assigned |= mask;
            self.blocks.push(block.clone());
            on_closed(self, block);
            self.blocks.pop();
            self.assigned &= !mask;
        }
        if size >= self.profile.max_size() {
            return;
        }
        let last = *block.last().expect("block is non-empty");
        let used = self.interval_mask(block);
        for c in last + 1..=self.m as u8 {
            if self.is_assigned(c) {
                if self.noncrossing {
                    // every later candidate would enclose an earlier block
                    break;
                }
                continue;
            }
            if let Some(p) = self.respect {
                if used & (1 << p.interval_of(c)) != 0 {
                    continue;
                }
            }
            if self.noncrossing {
                let gap = (c - last - 1) as usize;
                if !self.reachable[gap] {
                    continue;
                }
            }
            block.push(c);
            self.grow(block, on_closed);
            block.pop();
        }
    }

    /// All admissible first blocks, in canonical order.
    fn first_blocks(&mut self) -> Vec<Block> {
        let mut out = Vec::new();
        if let Some(e) = self.least_unassigned() {
            let mut block = vec![e];
            self.grow(&mut block, &mut |_s: &mut Self, b: &[u8]| out.push(b.to_vec()));
        }
        out
    }
}

fn check_request(m: usize, respect: Option<&IntervalPattern>) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidGroundSize(m));
    }
    if m > GROUND_CAP {
        return Err(Error::GroundSetCap { size: m, cap: GROUND_CAP });
    }
    if let Some(p) = respect {
        if p.ground_size() != m {
            return Err(Error::PatternMismatch { pattern: p.ground_size(), ground: m });
        }
    }
    Ok(())
}

/// Visits every matching partition, splitting the work over the choice of
/// first block. Each worker folds into its own accumulator; accumulators are
/// returned in canonical order of their first blocks.
pub(crate) fn par_fold<A, I, F>(
    m: usize,
    profile: &BlockProfile,
    respect: Option<&IntervalPattern>,
    noncrossing: bool,
    init: I,
    fold: F,
) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &[Block]) + Sync,
{
    check_request(m, respect)?;
    let respect = respect.copied();
    let firsts = Search::new(m, profile, respect, noncrossing).first_blocks();
    Ok(firsts
        .into_par_iter()
        .map(|first| {
            let mut acc = init();
            let mut search = Search::new(m, profile, respect, noncrossing);
            let mask = first.iter().fold(0, |acc, &e| acc | 1u32 << (e - 1));
            search.assigned = mask;
            search.blocks.push(first);
            search.run(&mut |blocks: &[Block]| fold(&mut acc, blocks));
            acc
        })
        .collect())
}

/// All partitions of `[m]` with block sizes in `profile`, optionally
/// respecting an interval pattern and optionally non-crossing.
pub fn enumerate(
    m: usize,
    profile: &BlockProfile,
    respect: Option<&IntervalPattern>,
    noncrossing: bool,
) -> Result<Vec<Partition>> {
    let chunks = par_fold(m, profile, respect, noncrossing, Vec::new, |acc: &mut Vec<Partition>, blocks| {
        acc.push(Partition::from_canonical(m, blocks.to_vec()))
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Number of partitions `enumerate` would return.
pub fn count(m: usize, profile: &BlockProfile, respect: Option<&IntervalPattern>, noncrossing: bool) -> Result<u64> {
    let chunks = par_fold(m, profile, respect, noncrossing, || 0u64, |acc, _| *acc += 1)?;
    Ok(chunks.into_iter().sum())
}

/// Stack scan: walking `1..=m`, a revisited block must be the innermost
/// open one.
pub fn is_noncrossing(p: &Partition) -> bool {
    let labels = p.labels();
    let mut last_of = vec![0usize; p.block_count()];
    for (pos, &l) in labels.iter().enumerate() {
        last_of[l] = pos;
    }
    let mut opened = vec![false; p.block_count()];
    let mut stack: Vec<usize> = Vec::new();
    for (pos, &l) in labels.iter().enumerate() {
        if !opened[l] {
            opened[l] = true;
            if last_of[l] != pos {
                stack.push(l);
            }
            continue;
        }
        if stack.last() != Some(&l) {
            return false;
        }
        if last_of[l] == pos {
            stack.pop();
        }
    }
    true
}

/// True when two disjoint sorted blocks interleave (`a < b < a' < b'`).
pub(crate) fn blocks_cross(a: &[u8], b: &[u8]) -> bool {
    let (amin, amax) = (a[0], a[a.len() - 1]);
    // b must lie in one gap of a, or entirely outside [amin, amax]
    let gap_of = |x: u8| -> Option<usize> {
        if x < amin || x > amax {
            None
        } else {
            Some(a.partition_point(|&y| y < x))
        }
    };
    let first = gap_of(b[0]);
    b.iter().any(|&x| gap_of(x) != first)
}

/// Whether every block meets every interval of `pattern` at most once.
pub fn respects(p: &Partition, pattern: &IntervalPattern) -> Result<bool> {
    if p.ground_size() != pattern.ground_size() {
        return Err(Error::PatternMismatch { pattern: pattern.ground_size(), ground: p.ground_size() });
    }
    Ok(p.blocks().iter().all(|b| {
        let mut seen = 0u32;
        b.iter().all(|&e| {
            let bit = 1u32 << pattern.interval_of(e);
            let fresh = seen & bit == 0;
            seen |= bit;
            fresh
        })
    }))
}

/// Generalized joint cumulant of `(Z_{i_1}, ..., Z_{i_m})` for an
/// independent (or freely independent) identically distributed family:
/// the product over blocks of `cumulants[|b| - 1]` when every position of
/// the block carries the same variable index, zero otherwise.
///
/// `cumulants[j]` is the cumulant of order `j + 1`.
pub fn joint_cumulant_value(p: &Partition, index_assignment: &[usize], cumulants: &[Scalar]) -> Result<Scalar> {
    if index_assignment.len() != p.ground_size() {
        return Err(Error::PatternMismatch { pattern: index_assignment.len(), ground: p.ground_size() });
    }
    let mut value = Scalar::one();
    for b in p.blocks() {
        let k = cumulants
            .get(b.len() - 1)
            .ok_or(Error::MissingCumulant { needed: b.len(), available: cumulants.len() })?;
        let first = index_assignment[b[0] as usize - 1];
        if b.iter().any(|&e| index_assignment[e as usize - 1] != first) {
            return Ok(Scalar::zero());
        }
        value = value * k.clone();
    }
    Ok(value)
}

/// The single 4-block of the exceptional partition with parameter `h`.
pub fn rho_four_block(d: usize, h: usize) -> Block {
    vec![h as u8, (2 * d - h + 1) as u8, (2 * d + h) as u8, (4 * d - h + 1) as u8]
}

/// All pairings of the points outside `fixed` that, together with `fixed`,
/// give a non-crossing partition of `[4d]` respecting the four intervals.
pub fn noncrossing_completions(d: usize, fixed: &[u8]) -> Result<Vec<Partition>> {
    let m = 4 * d;
    check_request(m, None)?;
    let pattern = IntervalPattern::new(d, 4)?;
    let mut fixed = fixed.to_vec();
    fixed.sort_unstable();
    let mut free: Vec<u8> = (1..=m as u8).filter(|e| !fixed.contains(e)).collect();
    free.reverse(); // popped from the back in increasing order
    let mut pairs: Vec<Block> = Vec::new();
    let mut out = Vec::new();

    fn search(
        free: &mut Vec<u8>,
        pairs: &mut Vec<Block>,
        fixed: &[u8],
        pattern: &IntervalPattern,
        out: &mut Vec<Partition>,
        m: usize,
    ) {
        let Some(a) = free.pop() else {
            let mut blocks = pairs.clone();
            blocks.push(fixed.to_vec());
            blocks.sort_unstable_by_key(|b| b[0]);
            out.push(Partition::from_canonical(m, blocks));
            return;
        };
        for i in 0..free.len() {
            let b = free[i];
            if pattern.interval_of(a) == pattern.interval_of(b) {
                continue;
            }
            let pair = vec![a, b];
            if blocks_cross(fixed, &pair) || pairs.iter().any(|p| blocks_cross(p, &pair)) {
                continue;
            }
            free.remove(i);
            pairs.push(pair);
            search(free, pairs, fixed, pattern, out, m);
            pairs.pop();
            free.insert(i, b);
        }
        free.push(a);
    }

    search(&mut free, &mut pairs, &fixed, &pattern, &mut out, m);
    out.sort();
    Ok(out)
}

/// The `d` non-crossing partitions of `[4d]` that respect the four
/// intervals and contain exactly one block of size 4.
///
/// Each one is located by exhaustive completion search around its 4-block;
/// uniqueness of the completion and the decomposition of the whole class
/// (pairings plus these `d` partitions) are checked before returning.
pub fn rho_partitions(d: usize) -> Result<Vec<Partition>> {
    if d < 2 {
        return Err(Error::InvalidGroundSize(4 * d));
    }
    let mut rhos = Vec::with_capacity(d);
    for h in 1..=d {
        let four = rho_four_block(d, h);
        let completions = noncrossing_completions(d, &four)?;
        if completions.len() != 1 {
            return Err(Error::CompletionNotUnique { h, found: completions.len() });
        }
        rhos.extend(completions);
    }

    let pattern = IntervalPattern::new(d, 4)?;
    let with_fours = enumerate(4 * d, &BlockProfile::new([2, 4])?, Some(&pattern), true)?;
    let pairings = count(4 * d, &BlockProfile::pairings(), Some(&pattern), true)?;
    let exceptional: BTreeSet<&Partition> = with_fours.iter().filter(|p| !p.is_pairing()).collect();
    let expected: BTreeSet<&Partition> = rhos.iter().collect();
    if exceptional != expected || with_fours.len() as u64 != pairings + d as u64 {
        return Err(Error::InvalidPartition(format!(
            "decomposition failed for d = {d}: {} partitions, {pairings} pairings",
            with_fours.len()
        )));
    }
    Ok(rhos)
}
