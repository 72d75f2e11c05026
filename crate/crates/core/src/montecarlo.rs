//! Monte Carlo estimates for classical homogeneous sums.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{factorial, Kernel};
use crate::law::{ClassicalLaw, Sampler};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerSpec {
    pub sampler: Sampler,
    pub seed: u64,
    pub sample_count: u64,
}

impl SamplerSpec {
    pub fn new(sampler: Sampler, seed: u64, sample_count: u64) -> Result<Self> {
        sampler.validate()?;
        if sample_count == 0 {
            return Err(Error::InvalidSampler("sample count must be positive".into()));
        }
        Ok(SamplerSpec { sampler, seed, sample_count })
    }

    /// Uses the sampler attached to a named law.
    pub fn for_law(law: &ClassicalLaw, seed: u64, sample_count: u64) -> Result<Self> {
        let sampler = law
            .sampler()
            .cloned()
            .ok_or_else(|| Error::InvalidSampler(format!("no sampler is available for law {:?}", law.name)))?;
        Self::new(sampler, seed, sample_count)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl Estimate {
    /// `|mean − exact| ≤ k·stderr`, with a rounding allowance for
    /// degenerate samples.
    pub fn within(&self, exact: f64, k: f64) -> bool {
        (self.mean - exact).abs() <= k * self.stderr + 1e-12 * exact.abs().max(1.0)
    }
}

/// Generator for sample `index`: ChaCha keyed by the seed, one stream per
/// sample, entries taken in order from the stream.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn two_point<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0 + alpha
    } else {
        1.0 - alpha
    }
}

fn mixture_t<R: Rng>(q: u32, alpha: f64, rng: &mut R) -> f64 {
    (0..q).map(|_| two_point(alpha, rng)).product::<f64>().sqrt()
}

fn draw<R: Rng>(sampler: &Sampler, rng: &mut R) -> f64 {
    match sampler {
        Sampler::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        Sampler::Gaussian => rng.sample(StandardNormal),
        Sampler::TwoPoint { alpha } => two_point(*alpha, rng),
        Sampler::MixtureT { q, alpha } => mixture_t(*q, *alpha, rng),
        Sampler::ProductTx { base, q, alpha } => {
            let t = mixture_t(*q, *alpha, rng);
            t * draw(base, rng)
        }
    }
}

/// Draws of `T = √(V_1⋯V_q)`, one per sample index.
pub fn sample_mixture_t(spec: &SamplerSpec) -> Result<impl Iterator<Item = f64> + '_> {
    let Sampler::MixtureT { q, alpha } = spec.sampler else {
        return Err(Error::InvalidSampler("expected a mixture-t sampler".into()));
    };
    spec.sampler.validate()?;
    Ok((0..spec.sample_count).map(move |i| mixture_t(q, alpha, &mut sample_rng(spec.seed, i))))
}

/// Summation by halves; the result does not depend on thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
    x + y
}

fn summarize(values: &[f64], seed: u64) -> Estimate {
    let n = values.len();
    let mean = pairwise_sum(values) / n as f64;
    let squares: Vec<f64> = values.par_iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if n > 1 { pairwise_sum(&squares) / (n - 1) as f64 } else { 0.0 };
    Estimate { mean, stderr: (var / n as f64).sqrt(), n: n as u64, seed }
}

/// Empirical `E[T^k]` for a mixture-t spec.
pub fn estimate_t_moment(spec: &SamplerSpec, order: u32) -> Result<Estimate> {
    let Sampler::MixtureT { q, alpha } = spec.sampler else {
        return Err(Error::InvalidSampler("expected a mixture-t sampler".into()));
    };
    let values: Vec<f64> = (0..spec.sample_count)
        .into_par_iter()
        .map(|i| mixture_t(q, alpha, &mut sample_rng(spec.seed, i)).powi(order as i32))
        .collect();
    Ok(summarize(&values, spec.seed))
}

/// Empirical `E[Q_X(f)^k]` for `k ∈ {2, 3, 4}`.
pub fn estimate_moment(f: &Kernel, spec: &SamplerSpec, order: u32) -> Result<Estimate> {
    if !(2..=4).contains(&order) {
        return Err(Error::Unsupported(format!("Monte Carlo order {order}; orders 2, 3 and 4 are supported")));
    }
    spec.sampler.validate()?;
    let scale = factorial(f.degree()).to_f64().unwrap_or(f64::INFINITY);
    let terms: Vec<(Vec<usize>, f64)> =
        f.entries().into_iter().map(|(t, v)| (t.into_iter().map(|i| i - 1).collect(), v.to_f64() * scale)).collect();
    let n = f.n();
    let values: Vec<f64> = (0..spec.sample_count)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |x, i| {
                let mut rng = sample_rng(spec.seed, i);
                for xi in x.iter_mut() {
                    *xi = draw(&spec.sampler, &mut rng);
                }
                let q: f64 = terms.iter().map(|(t, v)| v * t.iter().map(|&j| x[j]).product::<f64>()).sum();
                q.powi(order as i32)
            },
        )
        .collect();
    Ok(summarize(&values, spec.seed))
}
