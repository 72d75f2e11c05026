//! Moments of homogeneous sums in freely independent variables.

use rayon::prelude::*;
use serde::Serialize;

use crate::classical::{active_profile, same, signature_label, weighted_partition_sum};
use crate::error::{Error, Result};
use crate::kernel::{factorial, Kernel};
use crate::law::FreeLaw;
use crate::network::shape_of;
use crate::partition::{self, BlockProfile, GROUND_CAP};
use crate::report::{term, Method, MomentReport};
use crate::scalar::Scalar;
use crate::transform;

/// Free cumulants `κ_1..κ_K` from moments over `𝒩𝒞([n])`.
pub fn moments_to_free_cumulants(moments: &[Scalar]) -> Result<Vec<Scalar>> {
    transform::moments_to_cumulants(moments, true)
}

pub fn free_cumulants_to_moments(cumulants: &[Scalar]) -> Result<Vec<Scalar>> {
    transform::cumulants_to_moments(cumulants, true)
}

/// Catalan numbers `C_0..C_K`, the even semicircular moments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalanTable {
    values: Vec<u64>,
}

impl CatalanTable {
    pub fn new(max: usize) -> Self {
        let mut values = vec![1u64];
        for k in 1..=max as u64 {
            let prev = values[k as usize - 1];
            values.push(prev * 2 * (2 * k - 1) / (k + 1));
        }
        CatalanTable { values }
    }

    pub fn get(&self, k: usize) -> Option<u64> {
        self.values.get(k).copied()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// Compares every entry with `|𝒩𝒞₂([2k])|` from the enumerator.
    pub fn verify(&self) -> Result<bool> {
        for (k, &c) in self.values.iter().enumerate().skip(1) {
            if 2 * k > GROUND_CAP {
                break;
            }
            if partition::count(2 * k, &BlockProfile::pairings(), None, true)? != c {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `d!^{k/2}`.
fn scaling(d: usize, k: usize) -> Scalar {
    let df = Scalar::big(factorial(d));
    let even = df.pow((k / 2) as u32);
    if k.is_multiple_of(2) {
        even
    } else {
        even * df.sqrt()
    }
}

fn check_ground(order: usize, d: usize) -> Result<()> {
    let m = order * d;
    if m > GROUND_CAP {
        return Err(Error::GroundSetCap { size: m, cap: GROUND_CAP });
    }
    Ok(())
}

/// `φ(Q_S(f)^k)` by summing over the non-crossing respecting pairings of
/// `[k·d]`.
pub fn semicircular_moment(f: &Kernel, order: usize) -> Result<MomentReport> {
    check_ground(order, f.degree())?;
    let kappa = [Scalar::zero(), Scalar::one()];
    let r = weighted_partition_sum(f, order, Some(BlockProfile::pairings()), true, &kappa)?;
    Ok(r.with_scaled(scaling(f.degree(), order)))
}

/// `2 (Σ f²)² + Σ_{s=1}^{d−1} contraction_square_sum(f, s)`; for a
/// constant (degree 0) kernel the value is `f⁴`.
fn contraction_terms(f: &Kernel) -> Result<Vec<crate::report::Term>> {
    if f.degree() == 0 {
        return Ok(vec![term("constant", f.sum_fourth_powers())]);
    }
    let mut terms = vec![term("pairings", Scalar::int(2) * f.sum_squares().pow(2))];
    for s in 1..f.degree() {
        terms.push(term(format!("s={s}"), f.contraction_square_sum(s)?));
    }
    Ok(terms)
}

fn semicircular_fourth_value(f: &Kernel) -> Result<Scalar> {
    Ok(contraction_terms(f)?.into_iter().map(|t| t.value).sum())
}

/// `φ(Q_S(f)⁴)` through contractions.
pub fn semicircular_fourth_moment_contraction(f: &Kernel) -> Result<MomentReport> {
    let r = MomentReport::from_terms(Method::ClosedForm, contraction_terms(f)?);
    Ok(r.with_scaled(scaling(f.degree(), 4)))
}

/// `φ(Q_S(f(k, ·))⁴)` for every active index `k`.
fn slice_fourth_moments(f: &Kernel) -> Result<Vec<(usize, Scalar)>> {
    f.active_indices()
        .into_par_iter()
        .map(|k| Ok((k, semicircular_fourth_value(&f.slice_any(&[k])?)?)))
        .collect()
}

/// `Σ_k φ(Q_S(f(k, ·))⁴)`.
pub fn slice_fourth_sum(f: &Kernel) -> Result<Scalar> {
    Ok(slice_fourth_moments(f)?.into_iter().map(|(_, v)| v).sum())
}

/// `φ(Q_Y(f)⁴) = φ(Q_S(f)⁴) + κ₄(Y) Σ_k φ(Q_S(f(k, ·))⁴)`.
pub fn free_fourth_moment(f: &Kernel, law: &FreeLaw) -> Result<MomentReport> {
    law.check_assumption_b()?;
    if f.degree() == 0 {
        return Err(Error::InvalidKernel("degree must be at least 1".into()));
    }
    let kappa4 = law.fourth_cumulant()?.clone();
    let mut terms = vec![term("semicircular", semicircular_fourth_value(f)?)];
    if !kappa4.is_zero() {
        for (k, v) in slice_fourth_moments(f)? {
            terms.push(term(format!("k={k}"), kappa4.clone() * v));
        }
    }
    Ok(MomentReport::from_terms(Method::ClosedForm, terms).with_scaled(scaling(f.degree(), 4)))
}

/// `φ(Q_Y(f)^k)` for `k ≤ 4` by brute force over the non-crossing
/// respecting partitions of `[k·d]` weighted by free cumulants.
pub fn free_moment_oracle(f: &Kernel, law: &FreeLaw, order: usize) -> Result<MomentReport> {
    if order == 0 || order > 4 {
        return Err(Error::Unsupported(format!("free oracle of order {order}; orders 1 to 4 are supported")));
    }
    check_ground(order, f.degree())?;
    let profile = active_profile(law.cumulants(), order)?;
    let r = weighted_partition_sum(f, order, profile, true, law.cumulants())?;
    Ok(r.with_scaled(scaling(f.degree(), order)))
}

/// `φ(Q_Y(f)⁴)` by brute force, with the split into pairings and the `d`
/// exceptional partitions checked along the way.
pub fn free_fourth_moment_oracle(f: &Kernel, law: &FreeLaw) -> Result<MomentReport> {
    let mut report = free_moment_oracle(f, law, 4)?;
    let d = f.degree();
    if d < 2 {
        return Ok(report);
    }
    let kappa4 = law.fourth_cumulant()?.clone();
    let contractor = f.contractor();
    let rho_values: Vec<Scalar> = partition::rho_partitions(d)?
        .iter()
        .map(|rho| Ok(f.net_scalar(contractor.value(4, &shape_of(rho.blocks(), d))?, 4)))
        .collect::<Result<_>>()?;
    let rho_total: Scalar = rho_values.iter().cloned().sum();
    let term_of = |sizes: &[usize]| {
        let label = signature_label(sizes);
        report.detail.terms.iter().find(|t| t.label == label).map(|t| t.value.clone()).unwrap_or_default()
    };
    let pairing_sig = vec![2; 2 * d];
    let mut rho_sig = vec![2; 2 * d - 2];
    rho_sig.push(4);
    let pairing_part = term_of(&pairing_sig);
    let rho_part = term_of(&rho_sig);
    let semicircular = semicircular_moment(f, 4)?.value;
    let checks = [
        ("pairing_part_matches_semicircular", same(&pairing_part, &semicircular)),
        ("rho_part_matches_cumulant", same(&rho_part, &(kappa4.clone() * rho_total.clone()))),
        ("rho_matches_slices", same(&rho_total, &slice_fourth_sum(f)?)),
        ("rho_symmetric", same(&rho_values[0], &rho_values[d - 1])),
    ];
    for (name, ok) in checks {
        report.detail.checks.insert(name.to_string(), ok);
    }
    Ok(report)
}

/// Both sides of the fourth-cumulant difference identity for two laws.
#[derive(Clone, Debug, Serialize)]
pub struct DifferenceReport {
    /// `d!² κ₄(Q_A(f))`.
    pub lhs: Scalar,
    /// `d!² κ₄(Q_B(f)) + (φ(A⁴) − φ(B⁴)) d!² Σ_k φ(Q_S(f(k, ·))⁴)`.
    pub rhs: Scalar,
    pub slice_sum: Scalar,
    pub passed: bool,
}

/// Checks `d!²κ₄(Q_A) = d!²κ₄(Q_B) + (φ(A⁴) − φ(B⁴)) d!² Σ_k φ(Q_S(f(k,·))⁴)`
/// with both fourth moments taken from the brute-force oracle.
pub fn free_difference_identity(f: &Kernel, law_a: &FreeLaw, law_b: &FreeLaw) -> Result<DifferenceReport> {
    law_a.check_assumption_b()?;
    law_b.check_assumption_b()?;
    let scale = scaling(f.degree(), 4);
    let second = f.sum_squares();
    let kappa = |law: &FreeLaw| -> Result<Scalar> {
        let fourth = free_fourth_moment_oracle(f, law)?.value;
        Ok(scale.clone() * (fourth - Scalar::int(2) * second.pow(2)))
    };
    let slice_sum = slice_fourth_sum(f)?;
    let fourth_a = law_a.moment(4).expect("checked").clone();
    let fourth_b = law_b.moment(4).expect("checked").clone();
    let lhs = kappa(law_a)?;
    let rhs = kappa(law_b)? + (fourth_a - fourth_b) * scale.clone() * slice_sum.clone();
    let passed = same(&lhs, &rhs);
    Ok(DifferenceReport { lhs, rhs, slice_sum, passed })
}
