//! The group sequential trial model and its Monte Carlo simulator.
//!
//! Observations `X_1, X_2, …` are i.i.d. `N(μ, σ²)`. At look `i ≤ L` the
//! trial has collected `m = k_i·n` observations and stops with probability
//! `ψ((K_m − μ₀·m) / m^γ)`, where `K_m` is the running sum and `μ₀` the null
//! mean (zero unless configured). Otherwise it stops at `k_{L+1}·n`.
//!
//! Normal variates come from `rand_distr::StandardNormal` (ziggurat) on a
//! ChaCha8 stream; that pair is fixed because batches must be reproducible
//! bit for bit.

use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::psi::PsiSpec;
use crate::seed::stream_rng;

/// One member of the asymptotic family of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub mu: f64,
    pub sigma: f64,
    /// Boundary shape exponent.
    pub gamma: f64,
    /// Look multipliers `k_1 < … < k_{L+1}`.
    pub looks: Vec<u64>,
    /// Base size; look `i` happens after `looks[i]·n` observations.
    pub n: u64,
    pub psi: PsiSpec,
    /// Mean the stopping statistic is centred at.
    #[serde(default, rename = "mu0")]
    pub null_mean: f64,
}

impl TrialConfig {
    pub fn new(mu: f64, sigma: f64, gamma: f64, looks: Vec<u64>, n: u64, psi: PsiSpec) -> Self {
        TrialConfig {
            mu,
            sigma,
            gamma,
            looks,
            n,
            psi,
            null_mean: 0.0,
        }
    }

    pub fn with_null_mean(mut self, null_mean: f64) -> Self {
        self.null_mean = null_mean;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::config("mu", "must be finite"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config(
                "sigma",
                format!("must be finite and > 0, got {}", self.sigma),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::config(
                "gamma",
                format!("must be finite and >= 0, got {}", self.gamma),
            ));
        }
        if self.looks.len() < 2 {
            return Err(Error::config(
                "looks",
                "need at least one interim look and a final look",
            ));
        }
        if self.looks[0] == 0 {
            return Err(Error::config("looks", "multipliers must be positive"));
        }
        if self.looks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "looks",
                format!("must be strictly increasing, got {:?}", self.looks),
            ));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if !self.null_mean.is_finite() {
            return Err(Error::config("mu0", "must be finite"));
        }
        self.psi.validate()
    }

    /// Number of interim looks `L`.
    pub fn interim_looks(&self) -> usize {
        self.looks.len() - 1
    }

    /// Sample size at look `i` (1-based).
    pub fn look_size(&self, i: usize) -> u64 {
        self.looks[i - 1] * self.n
    }

    pub fn max_size(&self) -> u64 {
        self.look_size(self.looks.len())
    }

    /// Mean of the data relative to the null mean.
    pub fn drift(&self) -> f64 {
        self.mu - self.null_mean
    }

    /// Stopping probability at an interim look of size `m`, given the
    /// centred sum `K_m − μ·m`.
    #[inline]
    pub fn stop_probability(&self, m: u64, centred_sum: f64) -> f64 {
        let m = m as f64;
        self.psi
            .eval((self.drift() * m + centred_sum) / m.powf(self.gamma))
    }
}

/// How a look block is generated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// One normal variate per observation.
    #[default]
    Observations,
    /// One normal variate per look block, scaled to the block's sum.
    /// Same law for every statistic the trial reports.
    BlockSums,
}

/// Outcome of one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Look at which the trial stopped, `1..=L+1`.
    pub stop_index: usize,
    pub sample_size: u64,
    pub sum: f64,
    pub mean: f64,
    /// `√N·(mean − μ)/σ`.
    pub z: f64,
}

/// Simulates one trial. Blocks after the stopping look are never drawn.
pub fn simulate_trial<R: Rng + ?Sized>(
    config: &TrialConfig,
    rng: &mut R,
    sampling: Sampling,
) -> TrialResult {
    let last = config.looks.len();
    let mut centred = 0.0;
    let mut drawn = 0u64;
    let mut stop_index = last;
    for i in 1..=last {
        let m = config.look_size(i);
        let block = m - drawn;
        let noise: f64 = match sampling {
            Sampling::Observations => (0..block).map(|_| normal::draw(rng)).sum::<f64>(),
            Sampling::BlockSums => (block as f64).sqrt() * normal::draw(rng),
        };
        centred += config.sigma * noise;
        drawn = m;
        if i == last {
            break;
        }
        let p = config.stop_probability(m, centred);
        let stop = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < p
        };
        if stop {
            stop_index = i;
            break;
        }
    }
    let size = drawn as f64;
    TrialResult {
        stop_index,
        sample_size: drawn,
        sum: config.mu * size + centred,
        mean: config.mu + centred / size,
        z: centred / (config.sigma * size.sqrt()),
    }
}

/// A reproducible batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub config: TrialConfig,
    pub seed: u64,
    pub sampling: Sampling,
    pub replications: usize,
    pub results: Vec<TrialResult>,
}

impl SampleSet {
    pub fn z_values(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.z).collect()
    }

    /// Empirical frequency of stopping at each look, indexed from look 1.
    pub fn stop_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.config.looks.len()];
        for r in &self.results {
            counts[r.stop_index - 1] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 / self.replications as f64)
            .collect()
    }
}

/// Simulates `replications` trials; replicate `r` uses stream `r` of `seed`.
pub fn simulate_batch(config: &TrialConfig, replications: usize, seed: u64) -> Result<SampleSet> {
    simulate_batch_with(config, replications, seed, Sampling::Observations)
}

pub fn simulate_batch_with(
    config: &TrialConfig,
    replications: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<SampleSet> {
    config.validate()?;
    if replications == 0 {
        return Err(Error::config("replications", "must be at least 1"));
    }
    let results = (0..replications as u64)
        .into_par_iter()
        .map(|r| simulate_trial(config, &mut stream_rng(seed, r), sampling))
        .collect();
    Ok(SampleSet {
        config: config.clone(),
        seed,
        sampling,
        replications,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(psi: PsiSpec) -> TrialConfig {
        TrialConfig::new(0.0, 1.0, 0.5, vec![1, 2, 3], 4, psi)
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = base(PsiSpec::LeftIndicator);
        c.looks = vec![1, 3, 2];
        match c.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "looks"),
            other => panic!("unexpected {other:?}"),
        }
        c.looks = vec![1, 2];
        c.sigma = 0.0;
        assert!(matches!(
            c.validate(),
            Err(Error::InvalidConfig { field: "sigma", .. })
        ));
        c.sigma = 1.0;
        c.looks = vec![3];
        assert!(matches!(
            c.validate(),
            Err(Error::InvalidConfig { field: "looks", .. })
        ));
    }

    #[test]
    fn constant_one_stops_at_first_look() {
        let s = simulate_batch(&base(PsiSpec::constant(1.0)), 10, 3).unwrap();
        assert!(s
            .results
            .iter()
            .all(|r| r.stop_index == 1 && r.sample_size == 4));
    }

    #[test]
    fn constant_zero_runs_to_the_end() {
        let s = simulate_batch(&base(PsiSpec::constant(0.0)), 50, 3).unwrap();
        assert!(s
            .results
            .iter()
            .all(|r| r.stop_index == 3 && r.sample_size == 12));
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(simulate_batch(&base(PsiSpec::LeftIndicator), 0, 1).is_err());
    }

    #[test]
    fn batches_are_bit_identical() {
        let c = TrialConfig::new(0.3, 2.0, 0.25, vec![1, 2, 3], 7, PsiSpec::constant(0.4));
        let a = simulate_batch(&c, 100, 7).unwrap();
        let b = simulate_batch(&c, 100, 7).unwrap();
        assert_eq!(a, b);
        let c2 = simulate_batch(&c, 100, 8).unwrap();
        assert_ne!(a.results, c2.results);
    }

    #[test]
    fn lazy_generation_only_draws_needed_blocks() {
        // ψ ≡ 1 consumes exactly k_1·n normals and no uniform.
        let c = TrialConfig::new(0.0, 1.0, 0.0, vec![2, 5], 3, PsiSpec::constant(1.0));
        let mut rng = stream_rng(11, 0);
        let r = simulate_trial(&c, &mut rng, Sampling::Observations);
        let mut reference = stream_rng(11, 0);
        let direct: f64 = (0..6).map(|_| normal::draw(&mut reference)).sum::<f64>();
        assert_eq!(r.z, direct / 6f64.sqrt());
        assert_eq!(rng.next_u64(), reference.next_u64());
    }
}
