//! Fourth-moment sweeps over kernel families.

use serde::Serialize;

use crate::classical::classical_fourth_moment_formula;
use crate::error::{Error, Result};
use crate::family::KernelFamily;
use crate::free::free_fourth_moment;
use crate::kernel::{factorial, Kernel, Mode};
use crate::law::Law;
use crate::scalar::Scalar;

/// CSV column order.
pub const CSV_HEADER: [&str; 4] = ["n", "fourth_cumulant_scaled", "influence_max", "gap"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub n: usize,
    /// `χ₄(Q_X(f_n))` classically, `d!² κ₄(Q_Y(f_n))` in the free case.
    pub fourth_cumulant_scaled: Scalar,
    pub influence_max: Scalar,
    /// Distance of the scaled fourth moment to 3 (classical) or 2 (free).
    pub gap: Scalar,
}

impl DiagnosticsRow {
    pub fn csv_record(&self) -> [String; 4] {
        let dec = |s: &Scalar| s.to_f64().to_string();
        [self.n.to_string(), dec(&self.fourth_cumulant_scaled), dec(&self.influence_max), dec(&self.gap)]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub family: KernelFamily,
    pub law: String,
    pub rows: Vec<DiagnosticsRow>,
    /// Gap strictly decreasing along the sweep; descriptive only.
    pub gap_decreasing: bool,
}

fn row(f: &Kernel, n: usize, law: &Law) -> Result<DiagnosticsRow> {
    let value = match law {
        Law::Classical(l) => classical_fourth_moment_formula(f, l)?.value - Scalar::int(3),
        Law::Free(l) => {
            let df = Scalar::big(factorial(f.degree()));
            df.pow(2) * free_fourth_moment(f, l)?.value - Scalar::int(2)
        }
    };
    Ok(DiagnosticsRow { n, gap: value.abs(), fourth_cumulant_scaled: value, influence_max: f.influence_max() })
}

/// One row per `n` from the closed-form engines.
pub fn analyze(family: &KernelFamily, ns: &[usize], law: &Law, mode: Mode) -> Result<Diagnostics> {
    if ns.is_empty() {
        return Err(Error::FamilyRange { family: family.id.to_string(), requirement: "a non-empty n range".into() });
    }
    let rows = ns
        .iter()
        .map(|&n| {
            let f = family.kernel(n)?;
            let f = if mode == Mode::Float { f.to_float() } else { f };
            row(&f, n, law)
        })
        .collect::<Result<Vec<_>>>()?;
    let gap_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(Diagnostics { family: *family, law: law.name().to_string(), rows, gap_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyId;
    use crate::law::{ClassicalLaw, FreeLaw};

    #[test]
    fn star_sweep_matches_closed_form() {
        let fam = KernelFamily::new(FamilyId::Star, 3).unwrap();
        let m4 = Scalar::ratio(9, 2);
        let law = Law::Classical(ClassicalLaw::with_fourth(m4.clone()));
        let ns = [2, 3, 5];
        let diag = analyze(&fam, &ns, &law, Mode::Exact).unwrap();
        for r in &diag.rows {
            let k = Scalar::int(r.n as i64 - 1);
            let expected = m4.clone() * (Scalar::int(3) + (m4.pow(2) - Scalar::int(3)) / k) - Scalar::int(3);
            assert_eq!(r.fourth_cumulant_scaled, expected);
        }
        assert!(diag.gap_decreasing);
    }

    #[test]
    fn product_is_constant() {
        let fam = KernelFamily::new(FamilyId::Product, 2).unwrap();
        let law = Law::Classical(ClassicalLaw::with_fourth(Scalar::int(3).sqrt()));
        let diag = analyze(&fam, &[2, 3, 4], &law, Mode::Float).unwrap();
        for r in &diag.rows {
            assert!(r.fourth_cumulant_scaled.to_f64().abs() < 1e-12);
        }
    }

    #[test]
    fn free_rows_and_csv() {
        let fam = KernelFamily::new(FamilyId::Product, 2).unwrap();
        let diag = analyze(&fam, &[2], &Law::Free(FreeLaw::free_rademacher()), Mode::Exact).unwrap();
        assert_eq!(diag.rows[0].fourth_cumulant_scaled, Scalar::ratio(-1, 2));
        assert_eq!(diag.rows[0].gap, Scalar::ratio(1, 2));
        assert_eq!(diag.rows[0].csv_record()[0], "2");
        assert!(analyze(&fam, &[], &Law::Free(FreeLaw::semicircle()), Mode::Exact).is_err());
    }
}
