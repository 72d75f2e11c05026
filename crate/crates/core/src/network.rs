//! Contraction of `k` copies of a symmetric kernel along a partition.
//!
//! For a partition `σ` of `[k·d]` respecting the `k` intervals, the quantity
//! `Σ_{i constant on blocks of σ} ∏_c f(i^{(c)})` is a tensor network: one
//! variable per block, one factor per copy. Since `f` is symmetric, the value
//! depends only on the *shape* of `σ`: the multiset of copy masks of its
//! blocks. Partitions are therefore grouped into shape tables once per
//! `(k, d, profile)`, and every shape is contracted by greedy variable
//! elimination over the dense tensor of active indices.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::ops::{AddAssign, MulAssign};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::{self, Block, BlockProfile, IntervalPattern};

/// Largest intermediate table the evaluator will allocate.
pub const TABLE_CAP: u128 = 1 << 28;

pub(crate) trait Ring: Clone + Zero + One + for<'a> AddAssign<&'a Self> + for<'a> MulAssign<&'a Self> + Send + Sync {}

impl<T> Ring for T where T: Clone + Zero + One + for<'a> AddAssign<&'a T> + for<'a> MulAssign<&'a T> + Send + Sync {}

/// Sorted copy masks, one per block.
pub type Shape = Vec<u32>;

pub(crate) fn shape_of(blocks: &[Block], d: usize) -> Shape {
    let mut shape: Shape = blocks
        .iter()
        .map(|b| b.iter().fold(0u32, |m, &e| m | 1 << ((e as usize - 1) / d)))
        .collect();
    shape.sort_unstable();
    shape
}

struct Factor<'a, T: Clone> {
    vars: Vec<usize>,
    data: Cow<'a, [T]>,
}

/// Sums out the last variable of `order` from the product of `factors`.
fn eliminate<T: Ring>(factors: &[Factor<'_, T>], order: &[usize], n: usize) -> Vec<T> {
    let r = order.len();
    let strides: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| {
            order
                .iter()
                .map(|v| match f.vars.iter().position(|u| u == v) {
                    Some(p) => n.pow((f.vars.len() - 1 - p) as u32),
                    None => 0,
                })
                .collect()
        })
        .collect();
    let total = n.pow(r as u32);
    let mut out = vec![T::zero(); total / n];
    let mut idx = vec![0usize; r];
    let mut offs = vec![0usize; factors.len()];
    for step in 0..total {
        let head = &factors[0].data[offs[0]];
        if !head.is_zero() {
            let mut p = head.clone();
            let mut alive = true;
            for (f, &o) in factors.iter().zip(&offs).skip(1) {
                let x = &f.data[o];
                if x.is_zero() {
                    alive = false;
                    break;
                }
                p *= x;
            }
            if alive {
                out[step / n] += &p;
            }
        }
        let mut pos = r;
        while pos > 0 {
            pos -= 1;
            idx[pos] += 1;
            for (o, s) in offs.iter_mut().zip(&strides) {
                *o += s[pos];
            }
            if idx[pos] < n {
                break;
            }
            for (o, s) in offs.iter_mut().zip(&strides) {
                *o -= n * s[pos];
            }
            idx[pos] = 0;
        }
    }
    out
}

/// Contracts `copies` copies of the dense symmetric tensor `base`
/// (`n^d` entries, row-major) along `shape`.
pub(crate) fn contract<T: Ring>(base: &[T], n: usize, d: usize, copies: usize, shape: &[u32]) -> Result<T> {
    if shape.is_empty() {
        let mut v = T::one();
        for _ in 0..copies {
            v *= &base[0];
        }
        return Ok(v);
    }
    if n == 0 {
        return Ok(T::zero());
    }
    let mut factors: Vec<Factor<'_, T>> = (0..copies)
        .map(|c| {
            let vars: Vec<usize> = (0..shape.len()).filter(|&v| shape[v] & (1 << c) != 0).collect();
            debug_assert_eq!(vars.len(), d);
            Factor { vars, data: Cow::Borrowed(base) }
        })
        .collect();
    let mut remaining: Vec<usize> = (0..shape.len()).collect();
    while !remaining.is_empty() {
        let (pos, union) = remaining
            .iter()
            .enumerate()
            .map(|(p, &v)| {
                let mut u: Vec<usize> = factors
                    .iter()
                    .filter(|f| f.vars.contains(&v))
                    .flat_map(|f| f.vars.iter().copied())
                    .collect();
                u.sort_unstable();
                u.dedup();
                (p, u)
            })
            .min_by_key(|(_, u)| u.len())
            .expect("remaining is non-empty");
        let entries = (n as u128).saturating_pow(union.len() as u32);
        if entries > TABLE_CAP {
            return Err(Error::TooLarge { entries });
        }
        let v = remaining.swap_remove(pos);
        let (involved, kept): (Vec<_>, Vec<_>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = kept;
        let out_vars: Vec<usize> = union.iter().copied().filter(|&u| u != v).collect();
        let mut order = out_vars.clone();
        order.push(v);
        let data = eliminate(&involved, &order, n);
        factors.push(Factor { vars: out_vars, data: Cow::Owned(data) });
    }
    let mut value = T::one();
    for f in &factors {
        value *= &f.data[0];
    }
    Ok(value)
}

/// Exact integer or floating network value.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum NetValue {
    Int(BigInt),
    Float(f64),
}

pub(crate) enum Dense {
    Int { data: Vec<BigInt>, small: Option<Vec<i128>>, bits: u64 },
    Float(Vec<f64>),
}

/// Evaluates shapes against one dense kernel, caching by `(copies, shape)`.
pub(crate) struct Contractor {
    n: usize,
    d: usize,
    dense: Dense,
    cache: Mutex<HashMap<(usize, Shape), NetValue>>,
}

impl Contractor {
    pub(crate) fn new_int(n: usize, d: usize, data: Vec<BigInt>) -> Self {
        let bits = data.iter().map(|x| x.bits()).max().unwrap_or(0);
        let small = if bits < 60 { data.iter().map(|x| x.to_i128()).collect() } else { None };
        Contractor { n, d, dense: Dense::Int { data, small, bits }, cache: Mutex::new(HashMap::new()) }
    }

    pub(crate) fn new_float(n: usize, d: usize, data: Vec<f64>) -> Self {
        Contractor { n, d, dense: Dense::Float(data), cache: Mutex::new(HashMap::new()) }
    }

    pub(crate) fn value(&self, copies: usize, shape: &[u32]) -> Result<NetValue> {
        let key = (copies, shape.to_vec());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = match &self.dense {
            Dense::Float(data) => NetValue::Float(contract(data, self.n, self.d, copies, shape)?),
            Dense::Int { data, small, bits } => {
                let log_n = usize::BITS - self.n.leading_zeros();
                let bound = shape.len() as u64 * log_n as u64 + copies as u64 * bits + 2;
                match small {
                    Some(small) if bound < 126 => {
                        NetValue::Int(BigInt::from(contract(small, self.n, self.d, copies, shape)?))
                    }
                    _ => NetValue::Int(contract(data, self.n, self.d, copies, shape)?),
                }
            }
        };
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        Ok(v)
    }
}

/// Partitions grouped by shape.
#[derive(Debug)]
pub struct ShapeTable {
    pub copies: usize,
    pub degree: usize,
    pub entries: Vec<(Shape, u64)>,
}

impl ShapeTable {
    pub fn partition_count(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Respecting pairings grouped by shape without enumerating them: a shape is
/// a symmetric matrix `a` of pair counts between copies with row sums `d`,
/// realized by `d!^k / ∏_{i<j} a_ij!` pairings.
fn pairing_table(copies: usize, d: usize) -> ShapeTable {
    let pairs: Vec<(usize, usize)> = (0..copies).flat_map(|i| (i + 1..copies).map(move |j| (i, j))).collect();
    let mut entries = Vec::new();
    let mut left = vec![d; copies];
    let mut counts = vec![0usize; pairs.len()];

    fn go(
        p: usize,
        pairs: &[(usize, usize)],
        left: &mut [usize],
        counts: &mut [usize],
        d: usize,
        out: &mut Vec<(Shape, u64)>,
    ) {
        if p == pairs.len() {
            if left.iter().all(|&l| l == 0) {
                let copies = left.len();
                let denom: u128 = counts.iter().map(|&a| factorial(a)).product();
                let count = factorial(d).pow(copies as u32) / denom;
                let mut shape: Shape = pairs
                    .iter()
                    .zip(counts.iter())
                    .flat_map(|(&(i, j), &a)| std::iter::repeat_n(1u32 << i | 1 << j, a))
                    .collect();
                shape.sort_unstable();
                out.push((shape, count as u64));
            }
            return;
        }
        let (i, j) = pairs[p];
        // the last pair touching copy i must absorb what is left of it
        let last_for_i = pairs[p + 1..].iter().all(|&(a, b)| a != i && b != i);
        let max = left[i].min(left[j]);
        let min = if last_for_i { left[i] } else { 0 };
        if min > max {
            return;
        }
        for a in min..=max {
            left[i] -= a;
            left[j] -= a;
            counts[p] = a;
            go(p + 1, pairs, left, counts, d, out);
            left[i] += a;
            left[j] += a;
        }
        counts[p] = 0;
    }

    if copies == 0 || d == 0 {
        entries.push((Vec::new(), 1));
    } else {
        go(0, &pairs, &mut left, &mut counts, d, &mut entries);
    }
    entries.sort();
    ShapeTable { copies, degree: d, entries }
}

/// Shape table by explicit enumeration of the respecting partitions of
/// `[copies·d]`.
pub(crate) fn enumerated_table(copies: usize, d: usize, profile: &BlockProfile, noncrossing: bool) -> Result<ShapeTable> {
    if d == 0 {
        return Ok(ShapeTable { copies, degree: 0, entries: vec![(Vec::new(), 1)] });
    }
    let pattern = IntervalPattern::new(d, copies)?;
    let chunks = partition::par_fold(
        copies * d,
        profile,
        Some(&pattern),
        noncrossing,
        HashMap::<Shape, u64>::new,
        |acc, blocks| *acc.entry(shape_of(blocks, d)).or_insert(0) += 1,
    )?;
    let mut merged: HashMap<Shape, u64> = HashMap::new();
    for chunk in chunks {
        for (s, c) in chunk {
            *merged.entry(s).or_insert(0) += c;
        }
    }
    let mut entries: Vec<_> = merged.into_iter().collect();
    entries.sort();
    Ok(ShapeTable { copies, degree: d, entries })
}

type TableKey = (usize, usize, Vec<usize>, bool);

/// Cached shape table for the respecting partitions of `[copies·d]` with
/// block sizes in `profile`, optionally non-crossing.
pub(crate) fn shape_table(copies: usize, d: usize, profile: &BlockProfile, noncrossing: bool) -> Result<Arc<ShapeTable>> {
    static TABLES: OnceLock<Mutex<HashMap<TableKey, Arc<ShapeTable>>>> = OnceLock::new();
    let key = (copies, d, profile.sizes().collect(), noncrossing);
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = tables.lock().expect("table lock").get(&key) {
        return Ok(t.clone());
    }
    let table = if !noncrossing && *profile == BlockProfile::pairings() {
        pairing_table(copies, d)
    } else {
        enumerated_table(copies, d, profile, noncrossing)?
    };
    let table = Arc::new(table);
    tables.lock().expect("table lock").insert(key, table.clone());
    Ok(table)
}

/// Block sizes of a shape, ascending.
pub(crate) fn signature(shape: &[u32]) -> Vec<usize> {
    let mut sizes: Vec<usize> = shape.iter().map(|m| m.count_ones() as usize).collect();
    sizes.sort_unstable();
    sizes
}

/// Network sums grouped by block-size signature: for each signature, the
/// number of partitions and `Σ count · value(shape)`. Shapes whose signature
/// fails `keep` are skipped.
pub(crate) fn signature_sums(
    contractor: &Contractor,
    table: &ShapeTable,
    keep: impl Fn(&[usize]) -> bool + Sync,
) -> Result<BTreeMap<Vec<usize>, (u64, NetValue)>> {
    let values: Vec<(Vec<usize>, u64, NetValue)> = table
        .entries
        .par_iter()
        .filter_map(|(shape, count)| {
            let sig = signature(shape);
            keep(&sig).then(|| contractor.value(table.copies, shape).map(|v| (sig, *count, v)))
        })
        .collect::<Result<_>>()?;
    let mut out: BTreeMap<Vec<usize>, (u64, NetValue)> = BTreeMap::new();
    for (sig, count, v) in values {
        let scaled = match v {
            NetValue::Int(x) => NetValue::Int(x * count),
            NetValue::Float(x) => NetValue::Float(x * count as f64),
        };
        let slot = out.entry(sig).or_insert_with(|| (0, scaled.zero_like()));
        slot.0 += count;
        slot.1.add_assign(scaled);
    }
    Ok(out)
}

impl NetValue {
    fn zero_like(&self) -> NetValue {
        match self {
            NetValue::Int(_) => NetValue::Int(BigInt::zero()),
            NetValue::Float(_) => NetValue::Float(0.0),
        }
    }

    fn add_assign(&mut self, other: NetValue) {
        match (self, other) {
            (NetValue::Int(a), NetValue::Int(b)) => *a += b,
            (NetValue::Float(a), NetValue::Float(b)) => *a += b,
            _ => unreachable!("one contractor yields one kind of value"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all assignments of block values.
    fn brute(base: &[i64], n: usize, copies: usize, shape: &[u32]) -> i64 {
        let v = shape.len();
        let mut total = 0;
        for code in 0..n.pow(v as u32) {
            let vals: Vec<usize> = (0..v).map(|j| code / n.pow(j as u32) % n).collect();
            let mut prod = 1;
            for c in 0..copies {
                let idx = (0..v)
                    .filter(|&j| shape[j] & (1 << c) != 0)
                    .fold(0, |acc, j| acc * n + vals[j]);
                prod *= base[idx];
            }
            total += prod;
        }
        total
    }

    fn symmetric_tensor(n: usize, d: usize, seed: u64) -> Vec<i64> {
        let mut data = vec![0i64; n.pow(d as u32)];
        for (code, slot) in data.iter_mut().enumerate() {
            let mut idx: Vec<usize> = (0..d).map(|j| code / n.pow(j as u32) % n).collect();
            idx.sort_unstable();
            if idx.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let h = idx.iter().fold(seed, |h, &i| h.wrapping_mul(6364136223846793005).wrapping_add(i as u64 + 1));
            *slot = (h >> 33) as i64 % 7 - 3;
        }
        data
    }

    #[test]
    fn contraction_matches_brute_force() {
        for d in 1..=3 {
            for copies in [2usize, 3, 4] {
                let table = enumerated_table(copies, d, &BlockProfile::up_to(4), false).unwrap();
                let base = symmetric_tensor(4, d, 11 + d as u64);
                let base128: Vec<i128> = base.iter().map(|&x| x as i128).collect();
                for (shape, _) in table.entries.iter().filter(|(s, _)| s.len() <= 8) {
                    let fast = contract(&base128, 4, d, copies, shape).unwrap();
                    assert_eq!(fast, brute(&base, 4, copies, shape) as i128, "shape {shape:?}");
                }
            }
        }
    }

    #[test]
    fn pairing_table_matches_enumeration() {
        for copies in [2usize, 3, 4] {
            for d in 1..=4 {
                if copies * d > 16 {
                    continue;
                }
                let direct = enumerated_table(copies, d, &BlockProfile::pairings(), false).unwrap();
                let formula = pairing_table(copies, d);
                assert_eq!(direct.entries, formula.entries, "copies {copies}, d {d}");
            }
        }
    }

    #[test]
    fn empty_shape_is_a_product_of_constants() {
        assert_eq!(contract(&[3i128], 1, 0, 4, &[]).unwrap(), 81);
        assert_eq!(pairing_table(4, 0).entries, vec![(vec![], 1)]);
    }

    #[test]
    fn oversized_tables_are_refused() {
        let base = vec![1.0f64; 200 * 200];
        let shape = vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100];
        let err = contract(&base, 200, 3, 4, &shape).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }
}
