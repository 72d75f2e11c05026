use std::collections::BTreeMap;

use serde::Serialize;

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Enumeration,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub label: String,
    pub value: Scalar,
}

/// Breakdown of a computed value. `terms`, when present, sum to the value.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Detail {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<Term>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partitions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shapes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub checks: BTreeMap<String, bool>,
}

impl Detail {
    pub fn terms_total(&self) -> Scalar {
        self.terms.iter().map(|t| t.value.clone()).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub value: Scalar,
    pub method: Method,
    /// `d!^{k/2}` times the value, for free moments of order `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_value: Option<Scalar>,
    pub detail: Detail,
}

impl MomentReport {
    pub(crate) fn from_terms(method: Method, terms: Vec<Term>) -> Self {
        let detail = Detail { terms, ..Detail::default() };
        MomentReport { value: detail.terms_total(), method, scaled_value: None, detail }
    }

    pub(crate) fn with_scaled(mut self, factor: Scalar) -> Self {
        self.scaled_value = Some(factor * self.value.clone());
        self
    }
}

pub(crate) fn term(label: impl Into<String>, value: Scalar) -> Term {
    Term { label: label.into(), value }
}
