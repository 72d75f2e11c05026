//! Fourth moments of homogeneous sums in independent variables.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{binomial, factorial, Kernel};
use crate::law::ClassicalLaw;
use crate::network::{shape_table, signature_sums};
use crate::partition::{BlockProfile, GROUND_CAP};
use crate::report::{term, Method, MomentReport, Term};
use crate::scalar::{Scalar, FLOAT_TOL};
use crate::transform;

/// Cumulants `χ_1..χ_K` from moments `m_1..m_K` over `𝒫([n])`.
pub fn moments_to_cumulants_classical(moments: &[Scalar]) -> Result<Vec<Scalar>> {
    transform::moments_to_cumulants(moments, false)
}

pub fn cumulants_to_moments_classical(cumulants: &[Scalar]) -> Result<Vec<Scalar>> {
    transform::cumulants_to_moments(cumulants, false)
}

pub(crate) fn signature_label(sizes: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sizes.len() {
        let j = i + sizes[i..].iter().take_while(|&&s| s == sizes[i]).count();
        parts.push(format!("{}^{}", sizes[i], j - i));
        i = j;
    }
    if parts.is_empty() {
        "empty".into()
    } else {
        parts.join(" ")
    }
}

/// `Σ_{σ} ∏_b c_{|b|} · network(σ)` over the respecting partitions of
/// `[k·d]` with block sizes in `profile`, grouped by block-size signature.
pub(crate) fn weighted_partition_sum(
    f: &Kernel,
    copies: usize,
    profile: Option<BlockProfile>,
    noncrossing: bool,
    cumulants: &[Scalar],
) -> Result<MomentReport> {
    let Some(profile) = profile else {
        return Ok(MomentReport::from_terms(Method::Enumeration, Vec::new()));
    };
    let table = shape_table(copies, f.degree(), &profile, noncrossing)?;
    let contractor = f.contractor();
    let sums = signature_sums(&contractor, &table, |_| true)?;
    let mut terms = Vec::new();
    let mut partitions = 0;
    for (sig, (count, value)) in sums {
        partitions += count;
        let weight = sig.iter().fold(Scalar::one(), |acc, &s| acc * cumulants[s - 1].clone());
        terms.push(term(signature_label(&sig), weight * f.net_scalar(value, copies)));
    }
    let mut report = MomentReport::from_terms(Method::Enumeration, terms);
    report.detail.partitions = Some(partitions);
    report.detail.shapes = Some(table.entries.len());
    Ok(report)
}

/// Sizes `j ≤ max` with non-zero cumulant, or a missing-order error.
pub(crate) fn active_profile(cumulants: &[Scalar], max: usize) -> Result<Option<BlockProfile>> {
    if cumulants.len() < max {
        return Err(Error::MissingCumulant { needed: max, available: cumulants.len() });
    }
    let sizes: Vec<usize> = (1..=max).filter(|&j| !cumulants[j - 1].is_zero()).collect();
    if sizes.is_empty() {
        return Ok(None);
    }
    BlockProfile::new(sizes).map(Some)
}

/// `E[Q_N(f)^k]` by the Wick sum over respecting pairings.
pub fn gaussian_moment(f: &Kernel, order: usize) -> Result<MomentReport> {
    let gaussian = [Scalar::zero(), Scalar::one()];
    let mut r = weighted_partition_sum(f, order, Some(BlockProfile::pairings()), false, &gaussian)?;
    r.method = Method::Enumeration;
    Ok(r)
}

/// `E[Q_N(f)⁴]`.
pub fn gaussian_fourth_moment(f: &Kernel) -> Result<MomentReport> {
    gaussian_moment(f, 4)
}

fn gaussian_fourth_value(f: &Kernel) -> Result<Scalar> {
    Ok(gaussian_moment(f, 4)?.value)
}

/// `S_m = Σ_{j ∈ [n]^m} E[Q_N(f(j, ·))⁴]`, summed over sorted distinct `j`.
fn slice_sum(f: &Kernel, m: usize) -> Result<Scalar> {
    let active = f.active_indices();
    let subsets = crate::kernel::sorted_tuples(active.len(), m);
    let values: Vec<Scalar> = subsets
        .par_iter()
        .map(|pos| {
            let fixed: Vec<usize> = pos.iter().map(|&p| active[p - 1]).collect();
            gaussian_fourth_value(&f.slice_any(&fixed)?)
        })
        .collect::<Result<_>>()?;
    Ok(Scalar::big(factorial(m)) * values.into_iter().sum())
}

/// The per-`m` terms `C(d,m)⁴ m!³ χ₄^m S_m`, without checking assumptions.
pub(crate) fn formula_terms(f: &Kernel, chi4: &Scalar) -> Result<Vec<Term>> {
    let d = f.degree();
    (0..=d)
        .map(|m| {
            let coefficient = Scalar::big(binomial(d, m).pow(4) * factorial(m).pow(3)) * chi4.pow(m as u32);
            let value = if m == 0 {
                gaussian_fourth_value(f)?
            } else if coefficient.is_zero() {
                Scalar::zero()
            } else {
                coefficient * slice_sum(f, m)?
            };
            Ok(term(format!("m={m}"), value))
        })
        .collect()
}

/// `E[Q_X(f)⁴] = Σ_{m=0}^{d} C(d,m)⁴ m!³ χ₄(X)^m Σ_{j∈[n]^m} E[Q_N(f(j,·))⁴]`.
///
/// For `m = d` the slice is the constant `f(j)` and its Gaussian fourth
/// moment is `f(j)⁴`.
pub fn classical_fourth_moment_formula(f: &Kernel, law: &ClassicalLaw) -> Result<MomentReport> {
    law.check_assumption_a()?;
    let chi4 = law.fourth_cumulant()?.clone();
    Ok(MomentReport::from_terms(Method::ClosedForm, formula_terms(f, &chi4)?))
}

/// `E[Q_X(f)^k]` by brute force over every respecting partition of `[k·d]`
/// weighted by its classical cumulants.
pub fn classical_moment_oracle(f: &Kernel, law: &ClassicalLaw, order: usize) -> Result<MomentReport> {
    let m = order * f.degree();
    if m > GROUND_CAP {
        return Err(Error::GroundSetCap { size: m, cap: GROUND_CAP });
    }
    let profile = active_profile(law.cumulants(), order)?;
    weighted_partition_sum(f, order, profile, false, law.cumulants())
}

/// `E[Q_X(f)⁴]` by brute force.
pub fn classical_fourth_moment_oracle(f: &Kernel, law: &ClassicalLaw) -> Result<MomentReport> {
    classical_moment_oracle(f, law, 4)
}

pub(crate) fn same(a: &Scalar, b: &Scalar) -> bool {
    a.approx_eq(b, FLOAT_TOL)
}

/// Conditional moments for one realization of the mixture weights.
#[derive(Clone, Debug, Serialize)]
pub struct MixtureReport {
    pub t_values: Vec<Scalar>,
    /// `E_X[Q_{TX}(f)²] = d! Σ f² ∏ t²`.
    pub second_moment: Scalar,
    pub second_moment_oracle: Scalar,
    pub fourth_moment: Scalar,
    pub fourth_moment_oracle: Scalar,
    /// `E_X[Q⁴] − 6 E_X[Q²] + 3`.
    pub lhs: Scalar,
    /// `(E_X[Q⁴] − 3 E_X[Q²]²) + 3 (E_X[Q²] − 1)²`.
    pub rhs: Scalar,
    pub passed: bool,
}

/// Checks the decomposition of the conditional fourth moment given the
/// mixture weights `t`, computing the conditional moments on the rescaled
/// kernel `f · ∏ t_{i_l}` by both the closed form and the oracle.
pub fn mixture_identity_check(f: &Kernel, law: &ClassicalLaw, t_values: &[Scalar]) -> Result<MixtureReport> {
    law.check_assumption_a()?;
    if let Some(t) = t_values.iter().find(|t| **t <= Scalar::zero()) {
        return Err(Error::InvalidLaw(format!("mixture weight {t} is not positive")));
    }
    let g = f.weighted(t_values)?;
    let second_moment = g.norm();
    let second_moment_oracle = classical_moment_oracle(&g, law, 2)?.value;
    let fourth_moment = classical_fourth_moment_formula(&g, law)?.value;
    let fourth_moment_oracle = classical_fourth_moment_oracle(&g, law)?.value;
    let (e2, e4) = (second_moment.clone(), fourth_moment.clone());
    let lhs = e4.clone() - Scalar::int(6) * e2.clone() + Scalar::int(3);
    let chi = e4 - Scalar::int(3) * e2.pow(2);
    let rhs = chi + Scalar::int(3) * (e2 - Scalar::one()).pow(2);
    let passed = same(&lhs, &rhs) && same(&second_moment, &second_moment_oracle) && same(&fourth_moment, &fourth_moment_oracle);
    Ok(MixtureReport {
        t_values: t_values.to_vec(),
        second_moment,
        second_moment_oracle,
        fourth_moment,
        fourth_moment_oracle,
        lhs,
        rhs,
        passed,
    })
}

/// The mixture decomposition after averaging over the weights.
#[derive(Clone, Debug, Serialize)]
pub struct MixtureAverageReport {
    pub q: u32,
    pub alpha: Scalar,
    /// `E[Q_Z(f)⁴] − 3` with `Z = T·X`, from the closed form.
    pub direct: Scalar,
    /// `E_T[E_X[Q⁴]] − 3`.
    pub averaged: Scalar,
    /// `E_T[E_X[Q⁴] − 6 E_X[Q²] + 3]`.
    pub centered: Scalar,
    /// `E_T[(E_X[Q⁴] − 3 E_X[Q²]²) + 3 (E_X[Q²] − 1)²]`.
    pub decomposed: Scalar,
    /// `E_T[E_X[Q²]]`, which must be 1.
    pub second_moment: Scalar,
    pub passed: bool,
}

/// Averages the conditional moments over every realization of
/// `T_i = √(V_1⋯V_q)` and compares with the closed form for `Z = T·X`.
/// Exact when `√(1 ± α)` are rational.
pub fn mixture_average_check(f: &Kernel, law: &ClassicalLaw, q: u32, alpha: &Scalar) -> Result<MixtureAverageReport> {
    let product = ClassicalLaw::product_tx(law, q, alpha.clone())?;
    let direct = classical_fourth_moment_formula(f, &product)?.value - Scalar::int(3);
    let lo = Scalar::one() - alpha.clone();
    let hi = Scalar::one() + alpha.clone();
    let denom = Scalar::int(2).pow(q);
    let atoms: Vec<(Scalar, Scalar)> = (0..=q)
        .map(|a| {
            let t = (lo.pow(a) * hi.pow(q - a)).sqrt();
            (t, Scalar::big(binomial(q as usize, a as usize)) / denom.clone())
        })
        .collect();
    let n = f.n();
    let total = (atoms.len() as u64).pow(n as u32);
    let per_vector: Vec<(Scalar, Scalar, Scalar)> = (0..total)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let mut t = Vec::with_capacity(n);
            let mut w = Scalar::one();
            for _ in 0..n {
                let (ti, wi) = &atoms[(c % atoms.len() as u64) as usize];
                c /= atoms.len() as u64;
                t.push(ti.clone());
                w = w * wi.clone();
            }
            let g = f.weighted(&t)?;
            let e2 = g.norm();
            let e4 = classical_fourth_moment_formula(&g, law)?.value;
            Ok((w, e2, e4))
        })
        .collect::<Result<_>>()?;
    let mut averaged = Scalar::zero();
    let mut centered = Scalar::zero();
    let mut decomposed = Scalar::zero();
    let mut second_moment = Scalar::zero();
    for (w, e2, e4) in per_vector {
        averaged = averaged + w.clone() * e4.clone();
        centered = centered + w.clone() * (e4.clone() - Scalar::int(6) * e2.clone() + Scalar::int(3));
        let chi = e4 - Scalar::int(3) * e2.pow(2);
        decomposed = decomposed + w.clone() * (chi + Scalar::int(3) * (e2.clone() - Scalar::one()).pow(2));
        second_moment = second_moment + w * e2;
    }
    averaged = averaged - Scalar::int(3);
    let passed = same(&direct, &averaged)
        && same(&averaged, &centered)
        && same(&centered, &decomposed)
        && same(&second_moment, &f.norm());
    Ok(MixtureAverageReport { q, alpha: alpha.clone(), direct, averaged, centered, decomposed, second_moment, passed })
}

/// `χ₄(Q_N(f)) = E[Q_N(f)⁴] − 3 E[Q_N(f)²]²`.
pub fn gaussian_fourth_cumulant(f: &Kernel) -> Result<Scalar> {
    Ok(gaussian_fourth_value(f)? - Scalar::int(3) * f.norm().pow(2))
}
