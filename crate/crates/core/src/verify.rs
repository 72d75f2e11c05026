//! Randomized formula-vs-oracle suites.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::classical::{
    classical_fourth_moment_formula, classical_fourth_moment_oracle, gaussian_fourth_cumulant, gaussian_fourth_moment,
    mixture_identity_check,
};
use crate::error::{Error, Result};
use crate::free::{
    free_difference_identity, free_fourth_moment, free_fourth_moment_oracle, semicircular_fourth_moment_contraction,
    semicircular_moment, CatalanTable,
};
use crate::kernel::{factorial, Kernel, Mode};
use crate::law::{ClassicalLaw, FreeLaw};
use crate::partition::{self, BlockProfile, IntervalPattern};
use crate::scalar::{Scalar, FLOAT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    All,
    Classical,
    Free,
    Partitions,
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(Scope::All),
            "classical" => Ok(Scope::Classical),
            "free" => Ok(Scope::Free),
            "partitions" => Ok(Scope::Partitions),
            other => Err(Error::Parse(format!("unknown scope {other:?}"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::All => "all",
            Scope::Classical => "classical",
            Scope::Free => "free",
            Scope::Partitions => "partitions",
        })
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub scope: Scope,
    pub degrees: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Random kernels per `(d, n)`.
    pub cases: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { scope: Scope::All, degrees: vec![2, 3], sizes: vec![3, 4, 5], cases: 20, seed: 0, mode: Mode::Exact }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub max_deviation: f64,
    /// First failing input, enough to replay it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_case: Option<Value>,
}

impl CheckOutcome {
    fn new(name: &str) -> Self {
        CheckOutcome { name: name.into(), cases: 0, failures: 0, max_deviation: 0.0, failing_case: None }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, ok: bool, deviation: f64, case: impl FnOnce(&str) -> Value) {
        self.cases += 1;
        self.max_deviation = self.max_deviation.max(deviation);
        if !ok {
            self.failures += 1;
            if self.failing_case.is_none() {
                self.failing_case = Some(case(&self.name));
            }
        }
    }

    /// Equality check; engine errors count as failures.
    fn equal(&mut self, got: Result<(Scalar, Scalar)>, case: impl FnOnce(&str) -> Value) {
        match got {
            Ok((a, b)) => {
                let ok = a.approx_eq(&b, FLOAT_TOL);
                self.record(ok, a.deviation(&b), |name| with_values(case(name), &a, &b));
            }
            Err(e) => self.record(false, 0.0, |name| with_error(case(name), &e)),
        }
    }

    /// `lo ≤ hi` check; the deviation is the size of any violation.
    fn at_most(&mut self, got: Result<(Scalar, Scalar)>, case: impl FnOnce(&str) -> Value) {
        match got {
            Ok((lo, hi)) => {
                let slack = (hi.clone() - lo.clone()).to_f64();
                let ok = lo <= hi || (!lo.is_exact() || !hi.is_exact()) && slack >= -FLOAT_TOL * hi.to_f64().abs().max(1.0);
                self.record(ok, (-slack).max(0.0), |name| with_values(case(name), &lo, &hi));
            }
            Err(e) => self.record(false, 0.0, |name| with_error(case(name), &e)),
        }
    }
}

fn with_values(mut case: Value, a: &Scalar, b: &Scalar) -> Value {
    case["left"] = json!(a.to_string());
    case["right"] = json!(b.to_string());
    case
}

fn with_error(mut case: Value, e: &Error) -> Value {
    case["error"] = json!(e.to_string());
    case
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub scope: Scope,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().map(|c| c.failures).sum()
    }
}

pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    if matches!(config.scope, Scope::All | Scope::Partitions) {
        checks.extend(partition_suite()?);
    }
    if matches!(config.scope, Scope::All | Scope::Classical) {
        checks.extend(classical_suite(config)?);
    }
    if matches!(config.scope, Scope::All | Scope::Free) {
        checks.extend(free_suite(config)?);
    }
    Ok(VerifyReport { scope: config.scope, seed: config.seed, checks })
}

fn count_case(what: &str, size: usize, got: u64, expected: u64) -> Value {
    json!({ "count": what, "size": size, "got": got, "expected": expected })
}

fn count_check(out: &mut CheckOutcome, what: &str, size: usize, got: Result<u64>, expected: u64) {
    match got {
        Ok(c) => out.record(c == expected, c.abs_diff(expected) as f64, |_| count_case(what, size, c, expected)),
        Err(e) => out.record(false, 0.0, |_| with_error(json!({ "count": what, "size": size }), &e)),
    }
}

/// Bell numbers from the Bell triangle.
fn bell_numbers(max: usize) -> Vec<u64> {
    let mut bells = vec![1u64];
    let mut row = vec![1u64];
    for _ in 1..=max {
        let mut next = vec![*row.last().expect("non-empty")];
        for &x in &row {
            next.push(next.last().expect("non-empty") + x);
        }
        bells.push(next[0]);
        row = next;
    }
    bells
}

fn partition_suite() -> Result<Vec<CheckOutcome>> {
    let catalan = CatalanTable::new(12);
    let all = BlockProfile::up_to(24);
    let mut out = Vec::new();

    let mut c = CheckOutcome::new("noncrossing_pairings_catalan");
    for k in 1..=6 {
        let got = partition::count(2 * k, &BlockProfile::pairings(), None, true);
        count_check(&mut c, "noncrossing pairings", 2 * k, got, catalan.values()[k]);
    }
    out.push(c);

    let mut c = CheckOutcome::new("pairings_double_factorial");
    for k in 1..=6u64 {
        let expected = (1..=k).map(|i| 2 * i - 1).product();
        let got = partition::count(2 * k as usize, &BlockProfile::pairings(), None, false);
        count_check(&mut c, "pairings", 2 * k as usize, got, expected);
    }
    out.push(c);

    let mut c = CheckOutcome::new("partitions_bell");
    for (m, &b) in bell_numbers(9).iter().enumerate().skip(1) {
        count_check(&mut c, "partitions", m, partition::count(m, &all, None, false), b);
    }
    out.push(c);

    let mut c = CheckOutcome::new("noncrossing_partitions_catalan");
    for m in 1..=10 {
        count_check(&mut c, "noncrossing partitions", m, partition::count(m, &all, None, true), catalan.values()[m]);
    }
    out.push(c);

    let mut c = CheckOutcome::new("exceptional_partitions");
    for d in 2..=4 {
        let pattern = IntervalPattern::new(d, 4)?;
        let pairs = partition::count(4 * d, &BlockProfile::pairings(), Some(&pattern), true)?;
        let mixed = partition::count(4 * d, &BlockProfile::new(vec![2, 4])?, Some(&pattern), true);
        count_check(&mut c, "noncrossing respecting {2,4}", 4 * d, mixed, pairs + d as u64);
        let rho = partition::rho_partitions(d);
        let ok = matches!(&rho, Ok(r) if r.len() == d);
        c.record(ok, 0.0, |_| match rho {
            Ok(r) => json!({ "degree": d, "found": r.len() }),
            Err(e) => with_error(json!({ "degree": d }), &e),
        });
    }
    out.push(c);
    Ok(out)
}

/// The random kernel population for one `(d, n)`.
fn kernels(config: &VerifyConfig, d: usize, n: usize) -> Result<Vec<Kernel>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream((d * 1024 + n) as u64);
    (0..config.cases)
        .map(|_| {
            let density = rng.random_range(0.3..=1.0);
            let f = Kernel::random_admissible(n, d, density, &mut rng)?;
            Ok(if config.mode == Mode::Float { f.to_float() } else { f })
        })
        .collect()
}

fn kernel_case(check: &str, f: &Kernel, law: &str) -> Value {
    let kernel: Value = serde_json::from_str(&f.to_json()).unwrap_or(Value::Null);
    json!({ "check": check, "law": law, "kernel": kernel })
}

fn populations(config: &VerifyConfig) -> Result<Vec<Kernel>> {
    let mut all = Vec::new();
    for &d in &config.degrees {
        for &n in &config.sizes {
            all.extend(kernels(config, d, n)?);
        }
    }
    Ok(all)
}

fn classical_suite(config: &VerifyConfig) -> Result<Vec<CheckOutcome>> {
    let laws: Vec<ClassicalLaw> =
        [Scalar::int(1), Scalar::int(2), Scalar::int(3), Scalar::ratio(9, 2)].into_iter().map(ClassicalLaw::with_fourth).collect();
    let mut formula = CheckOutcome::new("classical_formula_vs_oracle");
    let mut positivity = CheckOutcome::new("gaussian_fourth_cumulant_nonnegative");
    let mut monotone = CheckOutcome::new("classical_monotonicity");
    let mut mixture = CheckOutcome::new("mixture_identity");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 << 32);
    let weights = [Scalar::ratio(1, 2), Scalar::one(), Scalar::ratio(3, 2), Scalar::int(2)];
    for f in populations(config)? {
        for law in &laws {
            let got = classical_fourth_moment_formula(&f, law)
                .and_then(|a| Ok((a.value, classical_fourth_moment_oracle(&f, law)?.value)));
            formula.equal(got, |name| kernel_case(name, &f, &law.name));
            if *law.fourth_cumulant()? >= Scalar::zero() {
                let got = gaussian_fourth_moment(&f).and_then(|g| Ok((g.value, classical_fourth_moment_formula(&f, law)?.value)));
                monotone.at_most(got, |name| kernel_case(name, &f, &law.name));
            }
        }
        positivity.at_most(gaussian_fourth_cumulant(&f).map(|c| (Scalar::zero(), c)), |name| {
            kernel_case(name, &f, "gaussian")
        });
        let t: Vec<Scalar> = (0..f.n()).map(|_| weights[rng.random_range(0..weights.len())].clone()).collect();
        let law = &laws[1];
        match mixture_identity_check(&f, law, &t) {
            Ok(r) => mixture.record(r.passed, r.lhs.deviation(&r.rhs), |name| {
                let mut case = kernel_case(name, &f, &law.name);
                case["t"] = json!(t.iter().map(|x| x.to_string()).collect::<Vec<_>>());
                case
            }),
            Err(e) => mixture.record(false, 0.0, |name| with_error(kernel_case(name, &f, &law.name), &e)),
        }
    }
    Ok(vec![formula, positivity, monotone, mixture])
}

fn free_suite(config: &VerifyConfig) -> Result<Vec<CheckOutcome>> {
    let laws: Vec<FreeLaw> = [-1, 0, 1, 3].into_iter().map(|k| FreeLaw::with_fourth(Scalar::int(2 + k))).collect();
    let mut formula = CheckOutcome::new("free_formula_vs_oracle");
    let mut split = CheckOutcome::new("free_oracle_split");
    let mut contraction = CheckOutcome::new("contraction_vs_pairings");
    let mut positivity = CheckOutcome::new("semicircular_fourth_moment_at_least_two");
    let mut monotone = CheckOutcome::new("free_monotonicity");
    let mut difference = CheckOutcome::new("difference_identity");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 << 33);
    for f in populations(config)? {
        let scale = Scalar::big(factorial(f.degree())).pow(2);
        let semicircular = semicircular_moment(&f, 4)?.value;
        let got = semicircular_fourth_moment_contraction(&f).map(|c| (c.value, semicircular.clone()));
        contraction.equal(got, |name| kernel_case(name, &f, "semicircle"));
        let got = Ok((Scalar::int(2), scale.clone() * semicircular.clone()));
        positivity.at_most(got, |name| kernel_case(name, &f, "semicircle"));
        for law in &laws {
            match free_fourth_moment(&f, law).and_then(|a| Ok((a.value, free_fourth_moment_oracle(&f, law)?))) {
                Ok((a, o)) => {
                    let ok = o.detail.checks.values().all(|&ok| ok);
                    split.record(ok, 0.0, |name| {
                        let mut case = kernel_case(name, &f, &law.name);
                        case["checks"] = json!(o.detail.checks);
                        case
                    });
                    formula.equal(Ok((a, o.value)), |name| kernel_case(name, &f, &law.name));
                }
                Err(e) => formula.equal(Err(e), |name| kernel_case(name, &f, &law.name)),
            }
            if *law.fourth_cumulant()? >= Scalar::zero() {
                let got = free_fourth_moment(&f, law).map(|r| (semicircular.clone(), r.value));
                monotone.at_most(got, |name| kernel_case(name, &f, &law.name));
            }
        }
        let (a, b) = (&laws[rng.random_range(0..laws.len())], &laws[rng.random_range(0..laws.len())]);
        match free_difference_identity(&f, a, b) {
            Ok(r) => difference.record(r.passed, r.lhs.deviation(&r.rhs), |name| {
                kernel_case(name, &f, &format!("{} vs {}", a.name, b.name))
            }),
            Err(e) => difference.record(false, 0.0, |name| with_error(kernel_case(name, &f, &a.name), &e)),
        }
    }
    Ok(vec![formula, split, contraction, positivity, monotone, difference])
}
