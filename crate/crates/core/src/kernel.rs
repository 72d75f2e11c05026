//! Symmetric kernels on `[n]^d` vanishing on diagonals.
//!
//! Only strictly increasing index tuples are stored. Exact kernels are kept
//! as `√scale_sq · B` with `B` a primitive integer tensor, so normalizations
//! such as `1/√(2n(n−1))` stay exact: every even-order quantity is a rational
//! multiple of a power of `scale_sq`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Contractor, NetValue, Ring};
use crate::scalar::{exact_sqrt, rational_to_f64, Scalar, FLOAT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Float => "float",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Exact { base: BTreeMap<Vec<usize>, BigInt>, scale_sq: BigRational },
    Float(BTreeMap<Vec<usize>, f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    n: usize,
    d: usize,
    repr: Repr,
}

/// Per-property admissibility verdict.
#[derive(Clone, Debug, Serialize)]
pub struct Admissibility {
    pub vanishes_on_diagonals: bool,
    pub symmetric: bool,
    pub normalized: bool,
    /// `d! · Σ f²` over all ordered tuples.
    pub norm: Scalar,
}

impl Admissibility {
    pub fn is_admissible(&self) -> bool {
        self.vanishes_on_diagonals && self.symmetric && self.normalized
    }
}

pub(crate) fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, j| acc * j)
}

pub(crate) fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// All strictly increasing `d`-tuples in `[n]`, lexicographically.
pub fn sorted_tuples(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn go(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            if n - i + 1 < d - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    go(1, n, d, &mut cur, &mut out);
    out
}

/// All orderings of a tuple of distinct entries.
pub(crate) fn permutations(t: &[usize]) -> Vec<Vec<usize>> {
    if t.len() <= 1 {
        return vec![t.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..t.len() {
        let mut rest = t.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

fn check_tuple(idx: &[usize], n: usize, d: usize) -> Result<()> {
    if idx.len() != d {
        return Err(Error::InvalidKernel(format!("index tuple {idx:?} has length {}, expected {d}", idx.len())));
    }
    for &i in idx {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidKernel(format!("index tuple {idx:?} lies on a diagonal")));
    }
    if idx.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidKernel(format!("index tuple {idx:?} is not sorted")));
    }
    Ok(())
}

/// Splits rationals `r_t` as `c · B_t` with `B` primitive and `c > 0`, and
/// folds `c²` into `scale_sq`.
fn canonical(values: BTreeMap<Vec<usize>, BigRational>, scale_sq: BigRational) -> Repr {
    let values: BTreeMap<_, _> = values.into_iter().filter(|(_, v)| !v.is_zero()).collect();
    if values.is_empty() || scale_sq.is_zero() {
        return Repr::Exact { base: BTreeMap::new(), scale_sq: BigRational::one() };
    }
    let lcm = values.values().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let ints: BTreeMap<_, _> = values.into_iter().map(|(k, v)| (k, (v * &lcm).to_integer())).collect();
    let gcd = ints.values().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    let base = ints.into_iter().map(|(k, v)| (k, v / &gcd)).collect();
    let c = BigRational::new(gcd, lcm);
    Repr::Exact { base, scale_sq: scale_sq * &c * &c }
}

impl Kernel {
    /// Exact kernel from rational values on sorted tuples.
    pub fn exact<I>(n: usize, d: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, BigRational)>,
    {
        Self::scaled_rational(n, d, entries, BigRational::one())
    }

    /// Exact kernel with values `√scale_sq · r_t`.
    pub fn scaled_rational<I>(n: usize, d: usize, entries: I, scale_sq: BigRational) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, BigRational)>,
    {
        if scale_sq.is_negative() {
            return Err(Error::InvalidKernel("negative squared scale".into()));
        }
        let values = collect_entries(n, d, entries)?;
        Ok(Kernel { n, d, repr: canonical(values, scale_sq) })
    }

    /// Exact kernel with values `√scale_sq · b_t` for integers `b_t`.
    pub fn scaled<I>(n: usize, d: usize, entries: I, scale_sq: BigRational) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, BigInt)>,
    {
        Self::scaled_rational(n, d, entries.into_iter().map(|(k, v)| (k, BigRational::from(v))), scale_sq)
    }

    pub fn float<I>(n: usize, d: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let values = collect_entries(n, d, entries)?;
        if values.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite entry".into()));
        }
        let values = values.into_iter().filter(|(_, v)| *v != 0.0).collect();
        Ok(Kernel { n, d, repr: Repr::Float(values) })
    }

    pub fn zero(n: usize, d: usize) -> Self {
        Kernel { n, d, repr: canonical(BTreeMap::new(), BigRational::one()) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> Mode {
        match self.repr {
            Repr::Exact { .. } => Mode::Exact,
            Repr::Float(_) => Mode::Float,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.mode() == Mode::Exact
    }

    pub fn support_len(&self) -> usize {
        match &self.repr {
            Repr::Exact { base, .. } => base.len(),
            Repr::Float(v) => v.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support_len() == 0
    }

    /// `√scale_sq`, exact when it is rational.
    fn scale(&self) -> Scalar {
        match &self.repr {
            Repr::Exact { scale_sq, .. } => Scalar::Exact(scale_sq.clone()).sqrt(),
            Repr::Float(_) => Scalar::one(),
        }
    }

    /// True when every entry is a rational number.
    pub fn has_rational_entries(&self) -> bool {
        match &self.repr {
            Repr::Exact { scale_sq, .. } => exact_sqrt(scale_sq).is_some(),
            Repr::Float(_) => false,
        }
    }

    /// Stored entries on sorted tuples.
    pub fn entries(&self) -> Vec<(Vec<usize>, Scalar)> {
        match &self.repr {
            Repr::Exact { base, .. } => {
                let c = self.scale();
                base.iter().map(|(k, b)| (k.clone(), c.clone() * Scalar::big(b.clone()))).collect()
            }
            Repr::Float(v) => v.iter().map(|(k, x)| (k.clone(), Scalar::Float(*x))).collect(),
        }
    }

    /// `f(idx)` for any (not necessarily sorted) tuple.
    pub fn value(&self, idx: &[usize]) -> Scalar {
        let mut key = idx.to_vec();
        key.sort_unstable();
        match &self.repr {
            Repr::Exact { base, .. } => match base.get(&key) {
                Some(b) => self.scale() * Scalar::big(b.clone()),
                None => Scalar::zero(),
            },
            Repr::Float(v) => Scalar::Float(v.get(&key).copied().unwrap_or(0.0)),
        }
    }

    /// `Σ_{sorted t} f(t)^p` for even `p`, exact in exact mode.
    fn sorted_power_sum(&self, p: u32, mut keep: impl FnMut(&[usize]) -> bool) -> Scalar {
        debug_assert!(p.is_multiple_of(2));
        match &self.repr {
            Repr::Exact { base, scale_sq } => {
                let s: BigInt = base.iter().filter(|(k, _)| keep(k)).map(|(_, b)| b.pow(p)).sum();
                Scalar::Exact(scale_sq.pow(p as i32 / 2) * BigRational::from(s))
            }
            Repr::Float(v) => Scalar::Float(v.iter().filter(|(k, _)| keep(k)).map(|(_, x)| x.powi(p as i32)).sum()),
        }
    }

    /// `Σ f²` over all ordered tuples.
    pub fn sum_squares(&self) -> Scalar {
        Scalar::big(factorial(self.d)) * self.sorted_power_sum(2, |_| true)
    }

    /// `Σ f⁴` over all ordered tuples.
    pub fn sum_fourth_powers(&self) -> Scalar {
        Scalar::big(factorial(self.d)) * self.sorted_power_sum(4, |_| true)
    }

    /// `d! · Σ f²` over ordered tuples; equals 1 for admissible kernels.
    pub fn norm(&self) -> Scalar {
        Scalar::big(factorial(self.d)) * self.sum_squares()
    }

    pub fn check_admissible(&self) -> Admissibility {
        let norm = self.norm();
        let normalized = match &norm {
            Scalar::Exact(r) => r.is_one(),
            Scalar::Float(x) => (x - 1.0).abs() <= FLOAT_TOL,
        };
        Admissibility { vanishes_on_diagonals: true, symmetric: true, normalized, norm }
    }

    pub fn to_float(&self) -> Kernel {
        let values = self.entries().into_iter().map(|(k, v)| (k, v.to_f64())).collect();
        Kernel { n: self.n, d: self.d, repr: Repr::Float(values) }
    }

    /// `c · f`.
    pub fn scale_by(&self, c: &Scalar) -> Kernel {
        match (&self.repr, c) {
            (Repr::Exact { base, scale_sq }, Scalar::Exact(c)) => {
                let sign = if c.is_negative() { -BigInt::one() } else { BigInt::one() };
                let values = base.iter().map(|(k, b)| (k.clone(), BigRational::from(b * &sign))).collect();
                Kernel { n: self.n, d: self.d, repr: canonical(values, scale_sq * c * c) }
            }
            _ => {
                let c = c.to_f64();
                let values = self.entries().into_iter().map(|(k, v)| (k, v.to_f64() * c)).filter(|(_, v)| *v != 0.0);
                Kernel { n: self.n, d: self.d, repr: Repr::Float(values.collect()) }
            }
        }
    }

    /// `f(i) · ∏_l t_{i_l}` with `t` indexed by `1..=n`.
    pub fn weighted(&self, t: &[Scalar]) -> Result<Kernel> {
        if t.len() != self.n {
            return Err(Error::InvalidKernel(format!("weight vector has length {}, expected {}", t.len(), self.n)));
        }
        let exact = t.iter().all(Scalar::is_exact);
        match &self.repr {
            Repr::Exact { base, scale_sq } if exact => {
                let values = base.iter().map(|(k, b)| {
                    let w = k.iter().fold(BigRational::from(b.clone()), |acc, &i| {
                        acc * t[i - 1].as_exact().expect("exact weight")
                    });
                    (k.clone(), w)
                });
                Kernel::scaled_rational(self.n, self.d, values, scale_sq.clone())
            }
            _ => {
                let values = self.entries().into_iter().map(|(k, v)| {
                    let w = k.iter().fold(v.to_f64(), |acc, &i| acc * t[i - 1].to_f64());
                    (k, w)
                });
                Kernel::float(self.n, self.d, values)
            }
        }
    }

    /// Relabels index `i` as `perm[i − 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Kernel> {
        let mut seen = vec![false; self.n + 1];
        if perm.len() != self.n || perm.iter().any(|&p| p == 0 || p > self.n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidKernel("relabeling is not a permutation".into()));
        }
        let map = |k: &Vec<usize>| {
            let mut t: Vec<usize> = k.iter().map(|&i| perm[i - 1]).collect();
            t.sort_unstable();
            t
        };
        let repr = match &self.repr {
            Repr::Exact { base, scale_sq } => {
                Repr::Exact { base: base.iter().map(|(k, v)| (map(k), v.clone())).collect(), scale_sq: scale_sq.clone() }
            }
            Repr::Float(v) => Repr::Float(v.iter().map(|(k, x)| (map(k), *x)).collect()),
        };
        Ok(Kernel { n: self.n, d: self.d, repr })
    }

    /// Kernel `(i_1..i_{d−m}) ↦ f(j_1..j_m, i_1..i_{d−m})`, not renormalized.
    pub fn slice(&self, fixed: &[usize]) -> Result<Kernel> {
        let m = fixed.len();
        if m == 0 || m >= self.d {
            return Err(Error::InvalidSlice { fixed: m, degree: self.d });
        }
        self.slice_any(fixed)
    }

    /// As [`Kernel::slice`], allowing `m = 0` and `m = d`.
    pub(crate) fn slice_any(&self, fixed: &[usize]) -> Result<Kernel> {
        let m = fixed.len();
        if m > self.d {
            return Err(Error::InvalidSlice { fixed: m, degree: self.d });
        }
        for &j in fixed {
            if j == 0 || j > self.n {
                return Err(Error::IndexOutOfRange { index: j, n: self.n });
            }
        }
        let degree = self.d - m;
        let set: BTreeSet<usize> = fixed.iter().copied().collect();
        if set.len() < m {
            return Ok(Kernel::zero(self.n, degree));
        }
        let rest = |k: &Vec<usize>| -> Option<Vec<usize>> {
            set.iter().all(|j| k.binary_search(j).is_ok()).then(|| k.iter().copied().filter(|i| !set.contains(i)).collect())
        };
        match &self.repr {
            Repr::Exact { base, scale_sq } => {
                let values = base.iter().filter_map(|(k, b)| Some((rest(k)?, BigRational::from(b.clone()))));
                Ok(Kernel { n: self.n, d: degree, repr: canonical(values.collect(), scale_sq.clone()) })
            }
            Repr::Float(v) => {
                let values = v.iter().filter_map(|(k, x)| Some((rest(k)?, *x)));
                Ok(Kernel { n: self.n, d: degree, repr: Repr::Float(values.collect()) })
            }
        }
    }

    /// `Σ_{i_2..i_d} f(i, i_2, …, i_d)²` over the symmetric extension.
    pub fn influence(&self, i: usize) -> Result<Scalar> {
        if i == 0 || i > self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if self.d == 0 {
            return Ok(Scalar::zero());
        }
        let orbit = Scalar::big(factorial(self.d - 1));
        Ok(orbit * self.sorted_power_sum(2, |k| k.binary_search(&i).is_ok()))
    }

    /// `max_i influence(f, i)`.
    pub fn influence_max(&self) -> Scalar {
        let mut best = Scalar::zero();
        for i in self.active_indices() {
            let v = self.influence(i).expect("active index in range");
            if v > best {
                best = v;
            }
        }
        best
    }

    /// `Σ_{j,k ∈ [n]^{d−s}} ( Σ_{a ∈ [n]^s} f(j, a) f(k, a) )²`.
    pub fn contraction_square_sum(&self, s: usize) -> Result<Scalar> {
        if s == 0 || s >= self.d {
            return Err(Error::OverlapOutOfRange { s, max: self.d.saturating_sub(1) });
        }
        match &self.repr {
            Repr::Exact { base, scale_sq } => {
                let total = contraction_sum(base, self.n, self.d, s);
                Ok(Scalar::Exact(scale_sq * scale_sq * BigRational::from(total)))
            }
            Repr::Float(v) => Ok(Scalar::Float(contraction_sum(v, self.n, self.d, s))),
        }
    }

    /// Indices appearing in the support, ascending.
    pub fn active_indices(&self) -> Vec<usize> {
        let keys: Box<dyn Iterator<Item = &Vec<usize>>> = match &self.repr {
            Repr::Exact { base, .. } => Box::new(base.keys()),
            Repr::Float(v) => Box::new(v.keys()),
        };
        let set: BTreeSet<usize> = keys.flatten().copied().collect();
        set.into_iter().collect()
    }

    /// Dense network evaluator over the active indices.
    pub(crate) fn contractor(&self) -> Contractor {
        let active = self.active_indices();
        let pos: HashMap<usize, usize> = active.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let n = active.len();
        let size = n.pow(self.d as u32);
        let offset = |t: &[usize]| t.iter().fold(0, |acc, i| acc * n + pos[i]);
        match &self.repr {
            Repr::Exact { base, .. } => {
                let mut data = vec![BigInt::zero(); size.max(1)];
                if self.d == 0 {
                    data[0] = base.get(&Vec::new()).cloned().unwrap_or_default();
                }
                for (k, b) in base {
                    for p in permutations(k) {
                        data[offset(&p)] = b.clone();
                    }
                }
                Contractor::new_int(n, self.d, data)
            }
            Repr::Float(v) => {
                let mut data = vec![0.0; size.max(1)];
                if self.d == 0 {
                    data[0] = v.get(&Vec::new()).copied().unwrap_or(0.0);
                }
                for (k, x) in v {
                    for p in permutations(k) {
                        data[offset(&p)] = *x;
                    }
                }
                Contractor::new_float(n, self.d, data)
            }
        }
    }

    /// `scale_sq^{k/2}`: the factor turning a `k`-copy integer network value
    /// into a value of `f`.
    pub(crate) fn copy_factor(&self, k: usize) -> Scalar {
        match &self.repr {
            Repr::Exact { scale_sq, .. } => {
                let even = Scalar::Exact(scale_sq.pow((k / 2) as i32));
                if k.is_multiple_of(2) {
                    even
                } else {
                    even * Scalar::Exact(scale_sq.clone()).sqrt()
                }
            }
            Repr::Float(_) => Scalar::one(),
        }
    }

    pub(crate) fn net_scalar(&self, v: NetValue, k: usize) -> Scalar {
        match v {
            NetValue::Int(x) => self.copy_factor(k) * Scalar::big(x),
            NetValue::Float(x) => Scalar::Float(x),
        }
    }

    /// Random exact admissible kernel with rational entries.
    ///
    /// A random rational point of the unit sphere (inverse stereographic
    /// projection of a random rational vector) is spread over a random
    /// subset of the sorted tuples and divided by `d!`.
    pub fn random_admissible<R: Rng + ?Sized>(n: usize, d: usize, density: f64, rng: &mut R) -> Result<Kernel> {
        let mut support: Vec<Vec<usize>> = sorted_tuples(n, d);
        if support.is_empty() {
            return Err(Error::ZeroKernel);
        }
        support.shuffle(rng);
        let keep = support.iter().skip(1).filter(|_| rng.random_bool(density.clamp(0.0, 1.0))).count() + 1;
        support.truncate(keep);
        let m = support.len();
        let c = BigInt::from(rng.random_range(1..=4i64));
        let u: Vec<BigRational> =
            (0..m - 1).map(|_| BigRational::new(BigInt::from(rng.random_range(-3..=3i64)), c.clone())).collect();
        let r2: BigRational = u.iter().map(|x| x * x).sum();
        let one = BigRational::one();
        let denom = &r2 + &one;
        let df = BigRational::from(factorial(d));
        let mut values: Vec<BigRational> = u.iter().map(|x| x * BigRational::from_integer(2.into()) / &denom).collect();
        values.push((&r2 - &one) / &denom);
        Kernel::exact(n, d, support.into_iter().zip(values.into_iter().map(|v| v / &df)))
    }
}

fn collect_entries<V, I>(n: usize, d: usize, entries: I) -> Result<BTreeMap<Vec<usize>, V>>
where
    I: IntoIterator<Item = (Vec<usize>, V)>,
{
    let mut out = BTreeMap::new();
    for (k, v) in entries {
        check_tuple(&k, n, d)?;
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::InvalidKernel(format!("index tuple {k:?} listed twice")));
        }
    }
    Ok(out)
}

fn contraction_sum<T: Ring>(sorted: &BTreeMap<Vec<usize>, T>, n: usize, d: usize, s: usize) -> T {
    let radix = n as u128 + 1;
    let code = |t: &[usize]| t.iter().fold(0u128, |acc, &i| acc * radix + i as u128);
    let mut groups: HashMap<u128, Vec<(u128, &T)>> = HashMap::new();
    for (k, v) in sorted {
        for p in permutations(k) {
            groups.entry(code(&p[d - s..])).or_default().push((code(&p[..d - s]), v));
        }
    }
    let mut c: HashMap<(u128, u128), T> = HashMap::new();
    for group in groups.values() {
        for (j, v) in group {
            for (k, w) in group {
                let mut p = (*v).clone();
                p *= *w;
                *c.entry((*j, *k)).or_insert_with(T::zero) += &p;
            }
        }
    }
    let mut total = T::zero();
    for x in c.values() {
        let mut sq = x.clone();
        sq *= x;
        total += &sq;
    }
    total
}

/// Symmetrizes, zeroes diagonals and normalizes an arbitrary map on
/// ordered tuples.
pub fn make_admissible(n: usize, d: usize, raw: &BTreeMap<Vec<usize>, Scalar>) -> Result<Kernel> {
    let exact = raw.values().all(Scalar::is_exact);
    let mut orbit: BTreeMap<Vec<usize>, Scalar> = BTreeMap::new();
    for (k, v) in raw {
        if k.len() != d {
            return Err(Error::InvalidKernel(format!("index tuple {k:?} has length {}, expected {d}", k.len())));
        }
        if let Some(&i) = k.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let mut t = k.clone();
        t.sort_unstable();
        if t.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let acc = orbit.entry(t).or_insert_with(Scalar::zero);
        *acc = acc.clone() + v.clone();
    }
    // averaging over permutations only rescales, so it is absorbed below
    let orbit: BTreeMap<_, _> = orbit.into_iter().filter(|(_, v)| !v.is_zero()).collect();
    if orbit.is_empty() {
        return Err(Error::ZeroKernel);
    }
    let df = factorial(d);
    if exact {
        let values: BTreeMap<_, _> =
            orbit.into_iter().map(|(k, v)| (k, v.as_exact().expect("exact").clone())).collect();
        let Repr::Exact { base, .. } = canonical(values, BigRational::one()) else { unreachable!() };
        let total: BigInt = base.values().map(|b| b * b).sum();
        let scale_sq = BigRational::new(BigInt::one(), &df * &df * total);
        Ok(Kernel { n, d, repr: Repr::Exact { base, scale_sq } })
    } else {
        let total: f64 = orbit.values().map(|v| v.to_f64().powi(2)).sum();
        let c = 1.0 / (df.to_f64().expect("small factorial") * total.sqrt());
        Kernel::float(n, d, orbit.into_iter().map(|(k, v)| (k, v.to_f64() * c)))
    }
}

/// JSON interchange format.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    n: usize,
    d: usize,
    mode: Mode,
    entries: Vec<EntryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_sq: Option<RationalRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    idx: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num: Option<IntText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    den: Option<IntText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    val: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RationalRecord {
    num: IntText,
    den: IntText,
}

/// Integers too wide for JSON numbers travel as strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IntText {
    Int(i64),
    Text(String),
}

impl IntText {
    fn from_big(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(x) => IntText::Int(x),
            None => IntText::Text(v.to_string()),
        }
    }

    fn to_big(&self) -> Result<BigInt> {
        match self {
            IntText::Int(x) => Ok(BigInt::from(*x)),
            IntText::Text(s) => s.trim().parse().map_err(|_| Error::Parse(format!("not an integer: {s:?}"))),
        }
    }
}

fn ratio(num: &IntText, den: &IntText, what: &str) -> Result<BigRational> {
    let den = den.to_big()?;
    if den.is_zero() {
        return Err(Error::InvalidKernel(format!("{what}: zero denominator")));
    }
    Ok(BigRational::new(num.to_big()?, den))
}

impl TryFrom<KernelFile> for Kernel {
    type Error = Error;

    fn try_from(file: KernelFile) -> Result<Kernel> {
        let KernelFile { n, d, mode, entries, scale_sq } = file;
        if n == 0 || d == 0 {
            return Err(Error::InvalidKernel("n and d must be positive".into()));
        }
        let mut exact = Vec::with_capacity(entries.len());
        let mut float = Vec::with_capacity(entries.len());
        for (pos, e) in entries.into_iter().enumerate() {
            let what = format!("entry {pos}");
            match (e.num, e.den, e.val) {
                (Some(num), den, None) => {
                    let den = den.unwrap_or(IntText::Int(1));
                    let r = ratio(&num, &den, &what)?;
                    float.push((e.idx.clone(), rational_to_f64(&r)));
                    exact.push((e.idx, r));
                }
                (None, None, Some(v)) => {
                    if mode == Mode::Exact {
                        return Err(Error::InvalidKernel(format!("{what}: \"val\" given for an exact kernel")));
                    }
                    float.push((e.idx, v));
                }
                _ => {
                    return Err(Error::InvalidKernel(format!("{what}: expected either num/den or val")));
                }
            }
        }
        let scale_sq = match scale_sq {
            Some(r) => ratio(&r.num, &r.den, "scale_sq")?,
            None => BigRational::one(),
        };
        match mode {
            Mode::Exact => Kernel::scaled_rational(n, d, exact, scale_sq),
            Mode::Float => {
                let c = rational_to_f64(&scale_sq).sqrt();
                Kernel::float(n, d, float.into_iter().map(|(k, v)| (k, v * c)))
            }
        }
    }
}

impl From<Kernel> for KernelFile {
    fn from(k: Kernel) -> KernelFile {
        let (n, d, mode) = (k.n, k.d, k.mode());
        match k.repr {
            Repr::Exact { base, scale_sq } => {
                let root = exact_sqrt(&scale_sq);
                let entries = base
                    .into_iter()
                    .map(|(idx, b)| {
                        let v = match &root {
                            Some(c) => c * BigRational::from(b),
                            None => BigRational::from(b),
                        };
                        EntryRecord {
                            idx,
                            num: Some(IntText::from_big(v.numer())),
                            den: Some(IntText::from_big(v.denom())),
                            val: None,
                        }
                    })
                    .collect();
                let scale_sq = root.is_none().then(|| RationalRecord {
                    num: IntText::from_big(scale_sq.numer()),
                    den: IntText::from_big(scale_sq.denom()),
                });
                KernelFile { n, d, mode, entries, scale_sq }
            }
            Repr::Float(v) => KernelFile {
                n,
                d,
                mode,
                entries: v.into_iter().map(|(idx, x)| EntryRecord { idx, num: None, den: None, val: Some(x) }).collect(),
                scale_sq: None,
            },
        }
    }
}

impl Serialize for Kernel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        KernelFile::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = KernelFile::deserialize(deserializer)?;
        Kernel::try_from(file).map_err(serde::de::Error::custom)
    }
}

impl Kernel {
    pub fn from_json(text: &str) -> Result<Kernel> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kernel serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn pair_kernel() -> Kernel {
        Kernel::exact(2, 2, [(vec![1, 2], q(1, 2))]).unwrap()
    }

    fn off_diagonal(n: usize) -> Kernel {
        let base = sorted_tuples(n, 2).into_iter().map(|t| (t, BigInt::one()));
        Kernel::scaled(n, 2, base, q(1, 2 * (n * (n - 1)) as i64)).unwrap()
    }

    /// Σ over all ordered tuples of `f(j, a) f(k, a)`, squared, by brute force.
    fn brute_contraction(f: &Kernel, s: usize) -> f64 {
        let (n, d) = (f.n(), f.degree());
        let all = |len: usize| -> Vec<Vec<usize>> {
            (0..n.pow(len as u32)).map(|c| (0..len).map(|j| c / n.pow(j as u32) % n + 1).collect()).collect()
        };
        let value = |t: &[usize]| {
            let mut u = t.to_vec();
            u.sort_unstable();
            if u.windows(2).any(|w| w[0] == w[1]) {
                0.0
            } else {
                f.value(&u).to_f64()
            }
        };
        let mut total = 0.0;
        for j in all(d - s) {
            for k in all(d - s) {
                let c: f64 = all(s)
                    .iter()
                    .map(|a| value(&[j.clone(), a.clone()].concat()) * value(&[k.clone(), a.clone()].concat()))
                    .sum();
                total += c * c;
            }
        }
        total
    }

    #[test]
    fn make_admissible_pair() {
        let raw = BTreeMap::from([(vec![1, 2], Scalar::one())]);
        let k = make_admissible(2, 2, &raw).unwrap();
        assert_eq!(k.value(&[2, 1]), Scalar::ratio(1, 2));
        assert!(k.check_admissible().is_admissible());
        assert_eq!(make_admissible(2, 2, &raw_of(&k)).unwrap(), k);
    }

    fn raw_of(k: &Kernel) -> BTreeMap<Vec<usize>, Scalar> {
        k.entries().into_iter().collect()
    }

    #[test]
    fn make_admissible_rejects_diagonal_only() {
        let raw = BTreeMap::from([(vec![1, 1], Scalar::one())]);
        assert!(matches!(make_admissible(2, 2, &raw), Err(Error::ZeroKernel)));
    }

    #[test]
    fn make_admissible_symmetrizes() {
        let raw = BTreeMap::from([(vec![1, 2], Scalar::int(3)), (vec![2, 1], Scalar::int(1)), (vec![3, 3], Scalar::int(7))]);
        let k = make_admissible(3, 2, &raw).unwrap();
        assert_eq!(k.support_len(), 1);
        assert_eq!(k.value(&[1, 2]), Scalar::ratio(1, 2));
        let float = make_admissible(3, 2, &raw_of(&k.to_float())).unwrap();
        assert!((float.norm().to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_diagonal_is_admissible() {
        let k = off_diagonal(3);
        assert!(k.check_admissible().is_admissible());
        assert!(!k.has_rational_entries());
        let doubled = k.scale_by(&Scalar::int(2)).check_admissible();
        assert!(!doubled.normalized);
        assert_eq!(doubled.norm, Scalar::int(4));
        let empty = Kernel::zero(3, 2).check_admissible();
        assert!(!empty.normalized);
        assert_eq!(empty.norm, Scalar::zero());
    }

    #[test]
    fn slices() {
        let g = pair_kernel().slice(&[1]).unwrap();
        assert_eq!(g.degree(), 1);
        assert_eq!(g.value(&[2]), Scalar::ratio(1, 2));
        assert_eq!(g.value(&[1]), Scalar::zero());
        let cube = Kernel::exact(4, 3, sorted_tuples(4, 3).into_iter().map(|t| (t, q(1, 7)))).unwrap();
        assert!(cube.slice(&[1, 1]).unwrap().is_zero());
        assert!(matches!(cube.slice(&[1, 2, 3]), Err(Error::InvalidSlice { .. })));
        assert!(matches!(cube.slice(&[5]), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(cube.slice(&[2, 4]).unwrap().value(&[1]), Scalar::ratio(1, 7));
    }

    #[test]
    fn influences() {
        for n in [3usize, 5, 8] {
            let k = off_diagonal(n);
            for i in 1..=n {
                assert_eq!(k.influence(i).unwrap(), Scalar::ratio(1, 2 * n as i64));
            }
            assert_eq!(k.influence_max(), Scalar::ratio(1, 2 * n as i64));
        }
        let mut pair = pair_kernel();
        pair.n = 3;
        assert_eq!(pair.influence(3).unwrap(), Scalar::zero());
        assert_eq!(Kernel::zero(3, 2).influence(1).unwrap(), Scalar::zero());
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(pair_kernel().contraction_square_sum(1).unwrap(), Scalar::ratio(1, 8));
        assert_eq!(Kernel::zero(3, 3).contraction_square_sum(2).unwrap(), Scalar::zero());
        assert!(matches!(pair_kernel().contraction_square_sum(2), Err(Error::OverlapOutOfRange { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 2..=3 {
            let k = Kernel::random_admissible(4, d, 0.7, &mut rng).unwrap();
            for s in 1..d {
                let exact = k.contraction_square_sum(s).unwrap().to_f64();
                assert!((exact - brute_contraction(&k, s)).abs() < 1e-12);
                let float = k.to_float().contraction_square_sum(s).unwrap().to_f64();
                assert!((exact - float).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for k in [pair_kernel(), off_diagonal(4), off_diagonal(4).to_float()] {
            let back = Kernel::from_json(&k.to_json()).unwrap();
            assert_eq!(back, k);
        }
        let text = r#"{"n":3,"d":2,"mode":"exact","entries":[{"idx":[1,2],"num":1,"den":2}]}"#;
        assert_eq!(Kernel::from_json(text).unwrap(), Kernel::exact(3, 2, [(vec![1, 2], q(1, 2))]).unwrap());
    }

    #[test]
    fn json_rejects_bad_tuples() {
        for idx in ["[2,1]", "[1,1]", "[1,4]", "[1]"] {
            let text = format!(r#"{{"n":3,"d":2,"mode":"exact","entries":[{{"idx":{idx},"num":1,"den":2}}]}}"#);
            assert!(Kernel::from_json(&text).is_err(), "{idx}");
        }
        let text = r#"{"n":3,"d":2,"mode":"exact","entries":[{"idx":[1,2],"val":0.5}]}"#;
        assert!(Kernel::from_json(text).is_err());
        let text = r#"{"n":3,"d":2,"mode":"exact","entries":[{"idx":[1,2],"num":1,"den":0}]}"#;
        assert!(Kernel::from_json(text).is_err());
    }

    #[test]
    fn random_kernels_are_admissible_and_rational() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let k = Kernel::random_admissible(5, 3, 0.5, &mut rng).unwrap();
            assert!(k.check_admissible().is_admissible());
            assert!(k.has_rational_entries());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kernel_strategy() -> impl Strategy<Value = Kernel> {
            (2usize..=5, 1usize..=3, any::<u64>()).prop_filter_map("degree fits", |(n, d, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (d <= n).then(|| Kernel::random_admissible(n, d, 0.6, &mut rng).unwrap())
            })
        }

        fn permutation(n: usize, seed: u64) -> Vec<usize> {
            let mut p: Vec<usize> = (1..=n).collect();
            p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            p
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn idempotent(k in kernel_strategy()) {
                let again = make_admissible(k.n(), k.degree(), &raw_of(&k)).unwrap();
                prop_assert_eq!(again, k);
            }

            #[test]
            fn influences_sum_to_squared_norm(k in kernel_strategy()) {
                let total: Scalar = (1..=k.n()).map(|i| k.influence(i).unwrap()).sum();
                prop_assert_eq!(total, k.sum_squares());
                prop_assert_eq!(k.sum_squares(), Scalar::Exact(BigRational::new(1.into(), factorial(k.degree()))));
            }

            #[test]
            fn contraction_relabel_invariant(k in kernel_strategy(), seed in any::<u64>()) {
                let r = k.relabel(&permutation(k.n(), seed)).unwrap();
                for s in 1..k.degree() {
                    prop_assert_eq!(k.contraction_square_sum(s).unwrap(), r.contraction_square_sum(s).unwrap());
                }
            }

            #[test]
            fn slice_commutes_with_relabel(k in kernel_strategy(), seed in any::<u64>(), j in 1usize..=5) {
                prop_assume!(k.degree() >= 2 && j <= k.n());
                let perm = permutation(k.n(), seed);
                let lhs = k.relabel(&perm).unwrap().slice(&[perm[j - 1]]).unwrap();
                let rhs = k.slice(&[j]).unwrap().relabel(&perm).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
