//! Named kernel families.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{factorial, sorted_tuples, Kernel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    /// `d = 2`, `f(i, j) = 1_{i≠j} / √(2n(n−1))`.
    OffDiagonalPair,
    /// `Q = X_1⋯X_d`, independent of `n ≥ d`.
    Product,
    /// `Q = X_1 · Σ_{i<n} X_2^{(i)}⋯X_d^{(i)} / √(n−1)` on disjoint blocks.
    Star,
    /// Symmetrized `Z^{(1)}⋯Z^{(d)}` with `Z^{(c)} = n^{−1/2} Σ_k Y_{k,c}`.
    FreeClt,
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "off-diagonal-pair" | "off-diagonal" => Ok(FamilyId::OffDiagonalPair),
            "product" => Ok(FamilyId::Product),
            "star" => Ok(FamilyId::Star),
            "free-clt" => Ok(FamilyId::FreeClt),
            other => Err(Error::Parse(format!("unknown kernel family {other:?}"))),
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyId::OffDiagonalPair => "off-diagonal-pair",
            FamilyId::Product => "product",
            FamilyId::Star => "star",
            FamilyId::FreeClt => "free-clt",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KernelFamily {
    pub id: FamilyId,
    pub degree: usize,
}

impl KernelFamily {
    pub fn new(id: FamilyId, degree: usize) -> Result<Self> {
        let bad = |requirement: &str| Err(Error::FamilyRange { family: id.to_string(), requirement: requirement.into() });
        match id {
            FamilyId::OffDiagonalPair if degree != 2 => bad("d = 2"),
            FamilyId::Star if degree < 2 => bad("d >= 2"),
            _ if degree == 0 => bad("d >= 1"),
            _ => Ok(KernelFamily { id, degree }),
        }
    }

    /// Smallest admissible size parameter.
    pub fn min_n(&self) -> usize {
        match self.id {
            FamilyId::OffDiagonalPair | FamilyId::Star => 2,
            FamilyId::Product => self.degree,
            FamilyId::FreeClt => 1,
        }
    }

    /// Index range of the `n`-th kernel.
    pub fn index_range(&self, n: usize) -> usize {
        match self.id {
            FamilyId::Star => 1 + (n - 1) * (self.degree - 1),
            FamilyId::FreeClt => n * self.degree,
            _ => n,
        }
    }

    pub fn kernel(&self, n: usize) -> Result<Kernel> {
        family_kernel(self, n)
    }
}

/// The `n`-th kernel of a family.
pub fn family_kernel(fam: &KernelFamily, n: usize) -> Result<Kernel> {
    let d = fam.degree;
    if n < fam.min_n() {
        return Err(Error::FamilyRange { family: fam.id.to_string(), requirement: format!("n >= {}", fam.min_n()) });
    }
    let df = factorial(d);
    let range = fam.index_range(n);
    match fam.id {
        FamilyId::OffDiagonalPair => {
            let base = sorted_tuples(n, 2).into_iter().map(|t| (t, BigInt::one()));
            Kernel::scaled(n, 2, base, BigRational::new(BigInt::one(), BigInt::from(2 * n * (n - 1))))
        }
        FamilyId::Product => {
            let entry = ((1..=d).collect(), BigRational::new(BigInt::one(), df));
            Kernel::exact(n, d, [entry])
        }
        FamilyId::Star => {
            let blocks = (0..n - 1).map(|i| {
                let start = 2 + i * (d - 1);
                let mut t = vec![1];
                t.extend(start..start + d - 1);
                (t, BigInt::one())
            });
            let scale_sq = BigRational::new(BigInt::one(), &df * &df * BigInt::from(n - 1));
            Kernel::scaled(range, d, blocks, scale_sq)
        }
        FamilyId::FreeClt => {
            // index j belongs to class (j − 1) mod d
            let base = sorted_tuples(range, d).into_iter().filter_map(|t| {
                let mut classes: Vec<usize> = t.iter().map(|j| (j - 1) % d).collect();
                classes.sort_unstable();
                classes.dedup();
                (classes.len() == d).then_some((t, BigInt::one()))
            });
            let scale_sq = BigRational::new(BigInt::one(), &df * &df * BigInt::from(n).pow(d as u32));
            Kernel::scaled(range, d, base, scale_sq)
        }
    }
}
