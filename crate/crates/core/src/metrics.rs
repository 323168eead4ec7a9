//! Summaries of simulated batches: Kolmogorov distance to `N(0, 1)`,
//! coverage of the naive interval, average interval limits and average
//! trial length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::trial::SampleSet;

/// Default critical value of the naive interval `μ̂ ± x σ/√N`.
pub const DEFAULT_CRITICAL: f64 = 1.96;

/// `sup_x |F_m(x) − Φ(x)|` for the empirical CDF `F_m` of `sample`.
pub fn empirical_ks(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::arg("Kolmogorov distance of an empty sample"));
    }
    if sample.iter().any(|v| v.is_nan()) {
        return Err(Error::arg("sample contains NaN"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let p = normal::cdf(z);
            ((i + 1) as f64 / m - p).max(p - i as f64 / m)
        })
        .fold(0.0, f64::max))
}

/// Upper bound `1/(2√m)` on the standard error of an empirical CDF value,
/// used as the standard error of a KS estimate from `m` draws.
pub fn ks_standard_error(m: usize) -> f64 {
    0.5 / (m as f64).sqrt()
}

/// Coverage of `μ̂ ± x σ/√N` and the averages of its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage: f64,
    pub avg_lower: f64,
    pub avg_upper: f64,
}

pub fn coverage_and_limits(samples: &SampleSet, x: f64) -> Result<Coverage> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::arg(format!(
            "critical value must be positive, got {x}"
        )));
    }
    let sigma = samples.config.sigma;
    let m = samples.results.len() as f64;
    let (mut hits, mut lower, mut upper) = (0usize, 0.0, 0.0);
    for r in &samples.results {
        if r.z.abs() <= x {
            hits += 1;
        }
        let half = x * sigma / (r.sample_size as f64).sqrt();
        lower += r.mean - half;
        upper += r.mean + half;
    }
    Ok(Coverage {
        coverage: hits as f64 / m,
        avg_lower: lower / m,
        avg_upper: upper / m,
    })
}

/// Mean number of observations per trial.
pub fn average_length(samples: &SampleSet) -> f64 {
    samples
        .results
        .iter()
        .map(|r| r.sample_size as f64)
        .sum::<f64>()
        / samples.results.len() as f64
}

/// One line of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub mu: f64,
    pub n: u64,
    /// Threshold of the stopping rule, when it has one.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub gamma: f64,
    pub side: String,
    pub avg_lower: f64,
    pub avg_upper: f64,
    pub coverage: f64,
    pub ks: f64,
    pub avg_length: f64,
    pub replications: usize,
    pub seed: u64,
}

pub fn summarize(samples: &SampleSet, x: f64) -> Result<StudyRow> {
    let cov = coverage_and_limits(samples, x)?;
    let cfg = &samples.config;
    Ok(StudyRow {
        mu: cfg.mu,
        n: cfg.n,
        c: cfg.psi.threshold(),
        gamma: cfg.gamma,
        side: cfg.psi.side_label().to_string(),
        avg_lower: cov.avg_lower,
        avg_upper: cov.avg_upper,
        coverage: cov.coverage,
        ks: empirical_ks(&samples.z_values())?,
        avg_length: average_length(samples),
        replications: samples.replications,
        seed: samples.seed,
    })
}
