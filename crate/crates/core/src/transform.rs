//! Moment/cumulant transforms over the partition lattices of `[n]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::law::MAX_ORDER;
use crate::partition::{self, BlockProfile};
use crate::scalar::Scalar;

/// Block-size multisets with multiplicities.
type SizeTable = Arc<Vec<(Vec<usize>, u64)>>;

/// Size table of the (non-crossing) partitions of `[n]`.
fn size_table(n: usize, noncrossing: bool) -> Result<SizeTable> {
    static TABLES: OnceLock<Mutex<HashMap<(usize, bool), SizeTable>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = tables.lock().expect("table lock").get(&(n, noncrossing)) {
        return Ok(t.clone());
    }
    let chunks = partition::par_fold(n, &BlockProfile::up_to(n), None, noncrossing, HashMap::new, |acc, blocks| {
        let mut sizes: Vec<usize> = blocks.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        *acc.entry(sizes).or_insert(0u64) += 1;
    })?;
    let mut merged: HashMap<Vec<usize>, u64> = HashMap::new();
    for chunk in chunks {
        for (k, c) in chunk {
            *merged.entry(k).or_insert(0) += c;
        }
    }
    let mut table: Vec<_> = merged.into_iter().collect();
    table.sort();
    let table = Arc::new(table);
    tables.lock().expect("table lock").insert((n, noncrossing), table.clone());
    Ok(table)
}

fn check_len(values: &[Scalar]) -> Result<()> {
    if values.is_empty() || values.len() > MAX_ORDER {
        return Err(Error::InvalidLaw(format!("transforms need 1 to {MAX_ORDER} values, got {}", values.len())));
    }
    Ok(())
}

fn product(sizes: &[usize], cumulants: &[Scalar]) -> Scalar {
    sizes.iter().fold(Scalar::one(), |acc, &s| acc * cumulants[s - 1].clone())
}

/// `m_n = Σ_π ∏_b c_{|b|}` over the chosen lattice.
pub(crate) fn cumulants_to_moments(cumulants: &[Scalar], noncrossing: bool) -> Result<Vec<Scalar>> {
    check_len(cumulants)?;
    (1..=cumulants.len())
        .map(|n| {
            let table = size_table(n, noncrossing)?;
            Ok(table.iter().map(|(sizes, count)| Scalar::int(*count as i64) * product(sizes, cumulants)).sum())
        })
        .collect()
}

/// Triangular solve of the same system for the cumulants.
pub(crate) fn moments_to_cumulants(moments: &[Scalar], noncrossing: bool) -> Result<Vec<Scalar>> {
    check_len(moments)?;
    let mut cumulants: Vec<Scalar> = Vec::with_capacity(moments.len());
    for n in 1..=moments.len() {
        let table = size_table(n, noncrossing)?;
        let mut padded = cumulants.clone();
        padded.push(Scalar::zero());
        let rest: Scalar = table
            .iter()
            .filter(|(sizes, _)| sizes.len() > 1)
            .map(|(sizes, count)| Scalar::int(*count as i64) * product(sizes, &padded))
            .sum();
        cumulants.push(moments[n - 1].clone() - rest);
    }
    Ok(cumulants)
}
