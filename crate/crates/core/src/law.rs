//! Entry laws given by their moment sequences.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::classical::{cumulants_to_moments_classical, moments_to_cumulants_classical};
use crate::error::{Error, Result};
use crate::free::{free_cumulants_to_moments, moments_to_free_cumulants};
use crate::scalar::Scalar;

/// Highest moment order the transforms handle.
pub const MAX_ORDER: usize = 8;

/// Tolerance for moment conditions on floating laws.
pub const ASSUMPTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Classical,
    Free,
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(Regime::Classical),
            "free" => Ok(Regime::Free),
            other => Err(Error::Parse(format!("unknown regime {other:?}"))),
        }
    }
}

/// Entry distributions the Monte Carlo harness can draw from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    Rademacher,
    Gaussian,
    /// `½(δ_{1−α} + δ_{1+α})`.
    TwoPoint { alpha: f64 },
    /// `T = √(V_1⋯V_q)` with i.i.d. two-point `V`.
    MixtureT { q: u32, alpha: f64 },
    /// `T·X` with `T` as above and `X` drawn from `base`.
    ProductTx { base: Box<Sampler>, q: u32, alpha: f64 },
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        match self {
            Sampler::TwoPoint { alpha } | Sampler::MixtureT { alpha, .. } if !(0.0..1.0).contains(alpha) => {
                Err(Error::InvalidSampler(format!("alpha = {alpha} outside [0, 1)")))
            }
            Sampler::MixtureT { q: 0, .. } | Sampler::ProductTx { q: 0, .. } => {
                Err(Error::InvalidSampler("q must be at least 1".into()))
            }
            Sampler::ProductTx { base, q, alpha } => {
                Sampler::MixtureT { q: *q, alpha: *alpha }.validate()?;
                base.validate()
            }
            _ => Ok(()),
        }
    }
}

fn check_alpha(alpha: &Scalar) -> Result<()> {
    if *alpha < Scalar::zero() || *alpha >= Scalar::one() {
        return Err(Error::InvalidSampler(format!("alpha = {alpha} outside [0, 1)")));
    }
    Ok(())
}

/// `E[V^{k/2}]` for the two-point law `½(δ_{1−α} + δ_{1+α})`.
fn two_point_half_moment(alpha: &Scalar, k: u32) -> Scalar {
    let lo = Scalar::one() - alpha.clone();
    let hi = Scalar::one() + alpha.clone();
    let (lo, hi) = if k.is_multiple_of(2) {
        (lo.pow(k / 2), hi.pow(k / 2))
    } else {
        (lo.pow(k / 2) * lo.sqrt(), hi.pow(k / 2) * hi.sqrt())
    };
    (lo + hi) / Scalar::int(2)
}

/// `E[T^k]` for `T = √(V_1⋯V_q)`.
pub fn mixture_t_moment(q: u32, alpha: &Scalar, k: u32) -> Scalar {
    two_point_half_moment(alpha, k).pow(q)
}

fn list_moments(moments: &[Scalar]) -> String {
    moments.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ")
}

fn check_moments(moments: &[Scalar]) -> Result<()> {
    if moments.is_empty() || moments.len() > MAX_ORDER {
        return Err(Error::InvalidLaw(format!("need between 1 and {MAX_ORDER} moments, got {}", moments.len())));
    }
    Ok(())
}

fn near(value: &Scalar, target: i64) -> bool {
    match value {
        Scalar::Exact(_) => *value == Scalar::int(target),
        Scalar::Float(x) => (x - target as f64).abs() <= ASSUMPTION_TOL,
    }
}

fn require(moments: &[Scalar], order: usize, target: i64, assumption: &'static str) -> Result<()> {
    match moments.get(order - 1) {
        None => Err(Error::Assumption { assumption, detail: format!("moment m{order} is not specified") }),
        Some(m) if !near(m, target) => {
            Err(Error::Assumption { assumption, detail: format!("m{order} = {m}, required {target}") })
        }
        Some(_) => Ok(()),
    }
}

/// Law of a classical (commuting) entry variable.
#[derive(Clone, Debug, Serialize)]
pub struct ClassicalLaw {
    pub name: String,
    moments: Vec<Scalar>,
    cumulants: Vec<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampler: Option<Sampler>,
}

impl ClassicalLaw {
    pub fn from_moments(name: impl Into<String>, moments: Vec<Scalar>) -> Result<Self> {
        check_moments(&moments)?;
        let cumulants = moments_to_cumulants_classical(&moments)?;
        Ok(ClassicalLaw { name: name.into(), moments, cumulants, sampler: None })
    }

    pub fn from_cumulants(name: impl Into<String>, cumulants: Vec<Scalar>) -> Result<Self> {
        check_moments(&cumulants)?;
        let moments = cumulants_to_moments_classical(&cumulants)?;
        Ok(ClassicalLaw { name: name.into(), moments, cumulants, sampler: None })
    }

    fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = Some(sampler);
        self
    }

    pub fn gaussian() -> Self {
        let m = [0, 1, 0, 3, 0, 15, 0, 105].map(Scalar::int).to_vec();
        Self::from_moments("gaussian", m).expect("valid moments").with_sampler(Sampler::Gaussian)
    }

    pub fn rademacher() -> Self {
        let m = [0, 1, 0, 1, 0, 1, 0, 1].map(Scalar::int).to_vec();
        Self::from_moments("rademacher", m).expect("valid moments").with_sampler(Sampler::Rademacher)
    }

    /// Centered, unit variance, `m3 = 0` and the given fourth moment.
    pub fn with_fourth(m4: Scalar) -> Self {
        let name = format!("m4={m4}");
        Self::from_moments(name, vec![Scalar::zero(), Scalar::one(), Scalar::zero(), m4]).expect("valid moments")
    }

    /// The two-point law `½(δ_{1−α} + δ_{1+α})`.
    pub fn two_point(alpha: Scalar) -> Result<Self> {
        check_alpha(&alpha)?;
        let lo = Scalar::one() - alpha.clone();
        let hi = Scalar::one() + alpha.clone();
        let m = (1..=MAX_ORDER as u32).map(|k| (lo.pow(k) + hi.pow(k)) / Scalar::int(2)).collect();
        let sampler = Sampler::TwoPoint { alpha: alpha.to_f64() };
        Ok(Self::from_moments(format!("two-point({alpha})"), m)?.with_sampler(sampler))
    }

    /// The law of `T = √(V_1⋯V_q)`.
    pub fn mixture_t(q: u32, alpha: Scalar) -> Result<Self> {
        check_alpha(&alpha)?;
        if q == 0 {
            return Err(Error::InvalidSampler("q must be at least 1".into()));
        }
        let m = (1..=MAX_ORDER as u32).map(|k| mixture_t_moment(q, &alpha, k)).collect();
        let sampler = Sampler::MixtureT { q, alpha: alpha.to_f64() };
        Ok(Self::from_moments(format!("mixture-t({q},{alpha})"), m)?.with_sampler(sampler))
    }

    /// The law of `T·X` with `T` independent of `X ~ base`.
    pub fn product_tx(base: &ClassicalLaw, q: u32, alpha: Scalar) -> Result<Self> {
        check_alpha(&alpha)?;
        if q == 0 {
            return Err(Error::InvalidSampler("q must be at least 1".into()));
        }
        let m = base
            .moments
            .iter()
            .zip(1..)
            .map(|(x, k)| if x.is_exact() && x.is_zero() { Scalar::zero() } else { mixture_t_moment(q, &alpha, k) * x.clone() })
            .collect();
        let mut law = Self::from_moments(format!("product-tx({},{q},{alpha})", base.name), m)?;
        if let Some(s) = &base.sampler {
            law.sampler = Some(Sampler::ProductTx { base: Box::new(s.clone()), q, alpha: alpha.to_f64() });
        }
        Ok(law)
    }

    /// `m_k`, 1-based.
    pub fn moment(&self, k: usize) -> Option<&Scalar> {
        self.moments.get(k.checked_sub(1)?)
    }

    /// `χ_k`, 1-based.
    pub fn cumulant(&self, k: usize) -> Option<&Scalar> {
        self.cumulants.get(k.checked_sub(1)?)
    }

    pub fn moments(&self) -> &[Scalar] {
        &self.moments
    }

    pub fn cumulants(&self) -> &[Scalar] {
        &self.cumulants
    }

    pub fn sampler(&self) -> Option<&Sampler> {
        self.sampler.as_ref()
    }

    /// `m1 = 0`, `m2 = 1`, `m3 = 0` and a finite fourth moment.
    pub fn check_assumption_a(&self) -> Result<()> {
        require(&self.moments, 1, 0, "(A)")?;
        require(&self.moments, 2, 1, "(A)")?;
        require(&self.moments, 3, 0, "(A)")?;
        if self.moments.len() < 4 {
            return Err(Error::Assumption { assumption: "(A)", detail: "moment m4 is not specified".into() });
        }
        Ok(())
    }

    pub fn fourth_cumulant(&self) -> Result<&Scalar> {
        self.cumulant(4).ok_or(Error::MissingCumulant { needed: 4, available: self.cumulants.len() })
    }
}

impl fmt::Display for ClassicalLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (moments {})", self.name, list_moments(&self.moments))
    }
}

/// Law of a free (non-commutative) entry variable.
#[derive(Clone, Debug, Serialize)]
pub struct FreeLaw {
    pub name: String,
    moments: Vec<Scalar>,
    cumulants: Vec<Scalar>,
}

impl FreeLaw {
    pub fn from_moments(name: impl Into<String>, moments: Vec<Scalar>) -> Result<Self> {
        check_moments(&moments)?;
        let cumulants = moments_to_free_cumulants(&moments)?;
        Ok(FreeLaw { name: name.into(), moments, cumulants })
    }

    pub fn from_cumulants(name: impl Into<String>, cumulants: Vec<Scalar>) -> Result<Self> {
        check_moments(&cumulants)?;
        let moments = free_cumulants_to_moments(&cumulants)?;
        Ok(FreeLaw { name: name.into(), moments, cumulants })
    }

    pub fn semicircle() -> Self {
        let m = [0, 1, 0, 2, 0, 5, 0, 14].map(Scalar::int).to_vec();
        Self::from_moments("semicircle", m).expect("valid moments")
    }

    pub fn free_rademacher() -> Self {
        let m = [0, 1, 0, 1, 0, 1, 0, 1].map(Scalar::int).to_vec();
        Self::from_moments("free-rademacher", m).expect("valid moments")
    }

    /// Centered, unit variance, `m3 = 0` and the given fourth moment.
    pub fn with_fourth(m4: Scalar) -> Self {
        let name = format!("m4={m4}");
        Self::from_moments(name, vec![Scalar::zero(), Scalar::one(), Scalar::zero(), m4]).expect("valid moments")
    }

    pub fn moment(&self, k: usize) -> Option<&Scalar> {
        self.moments.get(k.checked_sub(1)?)
    }

    pub fn cumulant(&self, k: usize) -> Option<&Scalar> {
        self.cumulants.get(k.checked_sub(1)?)
    }

    pub fn moments(&self) -> &[Scalar] {
        &self.moments
    }

    pub fn cumulants(&self) -> &[Scalar] {
        &self.cumulants
    }

    /// `m1 = 0`, `m2 = 1` and a finite fourth moment.
    pub fn check_assumption_b(&self) -> Result<()> {
        require(&self.moments, 1, 0, "(B)")?;
        require(&self.moments, 2, 1, "(B)")?;
        if self.moments.len() < 4 {
            return Err(Error::Assumption { assumption: "(B)", detail: "moment m4 is not specified".into() });
        }
        Ok(())
    }

    pub fn fourth_cumulant(&self) -> Result<&Scalar> {
        self.cumulant(4).ok_or(Error::MissingCumulant { needed: 4, available: self.cumulants.len() })
    }
}

impl fmt::Display for FreeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (moments {})", self.name, list_moments(&self.moments))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum Law {
    Classical(ClassicalLaw),
    Free(FreeLaw),
}

impl Law {
    pub fn name(&self) -> &str {
        match self {
            Law::Classical(l) => &l.name,
            Law::Free(l) => &l.name,
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            Law::Classical(_) => Regime::Classical,
            Law::Free(_) => Regime::Free,
        }
    }

    /// Parses a named law (`gaussian`, `rademacher`, `two-point(a)`,
    /// `mixture-t(q,a)`, `product-tx(base,q,a)`, `semicircle`,
    /// `free-rademacher`) or a moment list such as `m3=0,m4=9/2`.
    pub fn parse(spec: &str, regime: Regime) -> Result<Law> {
        let spec = spec.trim().to_ascii_lowercase();
        if spec.contains('=') {
            let moments = parse_moment_list(&spec)?;
            let name = spec.clone();
            return Ok(match regime {
                Regime::Classical => Law::Classical(ClassicalLaw::from_moments(name, moments)?),
                Regime::Free => Law::Free(FreeLaw::from_moments(name, moments)?),
            });
        }
        match regime {
            Regime::Classical => Ok(Law::Classical(parse_classical_name(&spec)?)),
            Regime::Free => match spec.as_str() {
                "semicircle" | "semicircular" => Ok(Law::Free(FreeLaw::semicircle())),
                "free-rademacher" | "rademacher" => Ok(Law::Free(FreeLaw::free_rademacher())),
                other => Err(Error::InvalidLaw(format!("unknown free law {other:?}"))),
            },
        }
    }
}

fn call_args<'a>(spec: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let inner = spec.strip_prefix(name)?.trim().strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_q(s: &str) -> Result<u32> {
    s.parse().map_err(|_| Error::Parse(format!("q must be a positive integer, got {s:?}")))
}

fn parse_classical_name(spec: &str) -> Result<ClassicalLaw> {
    match spec {
        "gaussian" | "normal" => return Ok(ClassicalLaw::gaussian()),
        "rademacher" => return Ok(ClassicalLaw::rademacher()),
        _ => {}
    }
    if let Some(args) = call_args(spec, "two-point") {
        return match args.as_slice() {
            [a] => ClassicalLaw::two_point(a.parse()?),
            _ => Err(Error::Parse("two-point takes one argument (alpha)".into())),
        };
    }
    if let Some(args) = call_args(spec, "product-tx").or_else(|| call_args(spec, "mixture-tx")) {
        return match args.as_slice() {
            [base, q, a] => ClassicalLaw::product_tx(&parse_classical_name(base)?, parse_q(q)?, a.parse()?),
            _ => Err(Error::Parse("product-tx takes (base, q, alpha)".into())),
        };
    }
    if let Some(args) = call_args(spec, "mixture-t").or_else(|| call_args(spec, "scaled-mixture")) {
        return match args.as_slice() {
            [q, a] => ClassicalLaw::mixture_t(parse_q(q)?, a.parse()?),
            [base, q, a] => ClassicalLaw::product_tx(&parse_classical_name(base)?, parse_q(q)?, a.parse()?),
            _ => Err(Error::Parse("mixture-t takes (q, alpha) or (base, q, alpha)".into())),
        };
    }
    Err(Error::InvalidLaw(format!("unknown classical law {spec:?}")))
}

/// `m1=…,m2=…,…`; `m1`, `m3` (and any odd order) default to 0, `m2` to 1.
fn parse_moment_list(spec: &str) -> Result<Vec<Scalar>> {
    let mut given: [Option<Scalar>; MAX_ORDER] = Default::default();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) =
            item.split_once('=').ok_or_else(|| Error::Parse(format!("expected mK=value, got {item:?}")))?;
        let order: usize = key
            .trim()
            .strip_prefix('m')
            .and_then(|k| k.parse().ok())
            .filter(|k| (1..=MAX_ORDER).contains(k))
            .ok_or_else(|| Error::Parse(format!("bad moment key {key:?} (use m1..m{MAX_ORDER})")))?;
        if given[order - 1].replace(value.trim().parse()?).is_some() {
            return Err(Error::Parse(format!("moment m{order} given twice")));
        }
    }
    let top = given.iter().rposition(Option::is_some).map_or(0, |p| p + 1).max(4);
    (1..=top)
        .map(|k| match given[k - 1].take() {
            Some(v) => Ok(v),
            None if k == 2 => Ok(Scalar::one()),
            None if k % 2 == 1 => Ok(Scalar::zero()),
            None => Err(Error::Parse(format!("moment m{k} must be given"))),
        })
        .collect()
}
