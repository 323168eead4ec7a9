//! Exact distributional identities for the normalized sample mean
//! `z = √N (μ̂_N − μ)/σ` after a group sequential trial.
//!
//! For bounded `h` and standard normal `ξ`, `η`,
//!
//! ```text
//! E[h(z)] − E[h(ξ)] = Σ_{i=1}^{L} E[ h(ξ) { W_i(μ m_i + σ √m_i ξ)
//!                         − W_i(μ m_i + σ (m_i/√M) ξ + σ √(m_i (M − m_i)/M) η) } ]
//! ```
//!
//! where `W_i = ψ_{m_i} · 𝒩_{n,i}` is the probability of stopping exactly at
//! look `i` given the running sum there, and `M` is the maximal size. The
//! second argument is the running sum at look `i` written as its regression
//! on the standardized final sum `ξ` plus an independent residual.
//!
//! [`rhs_transform`] evaluates the right side with the normal transform,
//! [`rhs_coefficients`] with sampled coefficient variables, and
//! [`lhs_discrepancy`] simulates the left side.

mod closed_form;
mod coefficients;

pub use closed_form::{
    example1_discrepancy, example1_ks, example1_lower_bound, example2_coverage,
    example2_discrepancy, example2_ks,
};
pub use coefficients::{rhs_coefficients, sample_bridge_offsets, CoefficientSample};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::seed::{derive_seed, stream_rng};
use crate::transform::{
    continuation_maps, continuation_probability, look_increments, QuadratureSpec,
};
use crate::trial::{simulate_batch, SampleSet, TrialConfig};

/// Slack added to every identity check for deterministic quadrature error.
pub const QUADRATURE_BUDGET: f64 = 1e-4;

/// Width of identity checks in combined standard errors.
pub const CHECK_SIGMAS: f64 = 3.0;

/// Test functions `h` for the identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "x", rename_all = "snake_case")]
pub enum TestFunction {
    /// `1_{(−∞, x]}`.
    IndicatorLeq(f64),
    /// `1_{[−x, x]}`, `x >= 0`.
    IndicatorAbsLeq(f64),
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let hit = match *self {
            TestFunction::IndicatorLeq(x) => v <= x,
            TestFunction::IndicatorAbsLeq(x) => v.abs() <= x,
        };
        if hit {
            1.0
        } else {
            0.0
        }
    }

    pub fn jumps(&self) -> Vec<f64> {
        match *self {
            TestFunction::IndicatorLeq(x) => vec![x],
            TestFunction::IndicatorAbsLeq(x) => vec![-x, x],
        }
    }

    /// `E[h(ξ)]` for standard normal `ξ`.
    pub fn standard_mean(&self) -> f64 {
        match *self {
            TestFunction::IndicatorLeq(x) => normal::cdf(x),
            TestFunction::IndicatorAbsLeq(x) => normal::interval_mass(-x, x),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TestFunction::IndicatorLeq(x) => format!("1(z <= {x})"),
            TestFunction::IndicatorAbsLeq(x) => format!("1(|z| <= {x})"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::IndicatorLeq(x) if x.is_finite() => Ok(()),
            TestFunction::IndicatorAbsLeq(x) if x.is_finite() && x >= 0.0 => Ok(()),
            _ => Err(Error::arg(format!("invalid test function {self:?}"))),
        }
    }
}

/// A point estimate with its standard error (zero for deterministic values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
        }
    }

    /// Sample mean and its standard error.
    pub fn from_samples(values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        if values.len() < 2 {
            return Estimate {
                value: mean,
                std_error: 0.0,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        Estimate {
            value: mean,
            std_error: (var / m).sqrt(),
        }
    }
}

/// `E[h(z)] − E[h(ξ)]` estimated from an existing batch.
pub fn discrepancy_from_samples(samples: &SampleSet, h: TestFunction) -> Estimate {
    let hits: Vec<f64> = samples.results.iter().map(|r| h.eval(r.z)).collect();
    let mc = Estimate::from_samples(&hits);
    Estimate {
        value: mc.value - h.standard_mean(),
        std_error: mc.std_error,
    }
}

/// Simulated `E[h(z)] − E[h(ξ)]`, with `E[h(ξ)]` in closed form.
pub fn lhs_discrepancy(
    config: &TrialConfig,
    h: TestFunction,
    replications: usize,
    seed: u64,
) -> Result<Estimate> {
    h.validate()?;
    let samples = simulate_batch(config, replications, seed)?;
    Ok(discrepancy_from_samples(&samples, h))
}

/// Looks up to this index have their continuation probability evaluated by
/// nested quadrature; later looks use sampled bridge offsets.
const QUADRATURE_MAX_LOOK: usize = 3;

/// Batches used to attach a standard error to the sampled continuation
/// probabilities.
const CONTINUATION_BATCHES: usize = 10;

/// Right side of the identity through the normal transform.
///
/// Every expectation is deterministic quadrature for looks up to three.
/// Later looks represent the continuation probability by averaging
/// `∏_j (1 − ψ_{m_j})(m_j/m_i · x + ρ_{i,j})` over `quad.mc_samples`
/// sampled bridge offsets `ρ`; the standard error then comes from
/// independent batches of those samples.
pub fn rhs_transform(
    config: &TrialConfig,
    h: TestFunction,
    quad: &QuadratureSpec,
    seed: u64,
) -> Result<Estimate> {
    rhs_transform_with(config, h, quad, seed, QUADRATURE_MAX_LOOK)
}

pub(crate) fn rhs_transform_with(
    config: &TrialConfig,
    h: TestFunction,
    quad: &QuadratureSpec,
    seed: u64,
    quadrature_max_look: usize,
) -> Result<Estimate> {
    config.validate()?;
    quad.validate()?;
    h.validate()?;
    let mut exact = 0.0;
    let mut sampled_looks = Vec::new();
    for look in 1..=config.interim_looks() {
        if look <= quadrature_max_look {
            let weight = |x: f64| -> f64 {
                let stop = stop_weight(config, look, x);
                if stop == 0.0 {
                    return 0.0;
                }
                stop * continuation_probability(config, look, x, quad).expect("validated inputs")
            };
            exact += look_term(config, look, h, quad, weight);
        } else {
            sampled_looks.push(look);
        }
    }
    if sampled_looks.is_empty() {
        return Ok(Estimate::exact(exact));
    }

    let per_batch = (quad.mc_samples / CONTINUATION_BATCHES).max(1);
    let batches: Vec<f64> = (0..CONTINUATION_BATCHES as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(derive_seed(seed, 0x5eed_0001), b);
            sampled_looks
                .iter()
                .map(|&look| {
                    let increments = look_increments(config, look);
                    let offsets: Vec<Vec<f64>> = (0..per_batch)
                        .map(|_| {
                            sample_bridge_offsets(&increments, config.sigma, &mut rng)
                                .expect("increments are positive")
                        })
                        .collect();
                    let maps = continuation_maps(config, look);
                    let m_i = config.look_size(look) as f64;
                    let ratios: Vec<f64> = (1..look)
                        .map(|j| config.look_size(j) as f64 / m_i)
                        .collect();
                    let weight = |x: f64| -> f64 {
                        let stop = stop_weight(config, look, x);
                        if stop == 0.0 {
                            return 0.0;
                        }
                        let cont = offsets
                            .iter()
                            .map(|rho| {
                                maps.iter()
                                    .zip(&ratios)
                                    .zip(rho)
                                    .map(|((b, r), o)| b.eval(r * x + o))
                                    .product::<f64>()
                            })
                            .sum::<f64>()
                            / offsets.len() as f64;
                        stop * cont
                    };
                    look_term(config, look, h, quad, weight)
                })
                .sum()
        })
        .collect();
    let spread = Estimate::from_samples(&batches);
    Ok(Estimate {
        value: exact + spread.value,
        std_error: spread.std_error,
    })
}

/// `ψ_{m_i}(x)`.
fn stop_weight(config: &TrialConfig, look: usize, x: f64) -> f64 {
    let m = config.look_size(look) as f64;
    config
        .psi
        .eval((x - config.null_mean * m) / m.powf(config.gamma))
}

/// `E[h(ξ) W(μm + σ√m ξ)] − E[h(ξ) W(μm + σ(m/√M)ξ + σ√(m(M−m)/M) η)]`.
fn look_term(
    config: &TrialConfig,
    look: usize,
    h: TestFunction,
    quad: &QuadratureSpec,
    weight: impl Fn(f64) -> f64 + Sync,
) -> f64 {
    let m = config.look_size(look) as f64;
    let big_m = config.max_size() as f64;
    let (mu, sigma) = (config.mu, config.sigma);
    let centre = mu * m;
    let stop_jumps: Vec<f64> = config
        .psi
        .jumps()
        .into_iter()
        .map(|j| config.null_mean * m + m.powf(config.gamma) * j)
        .collect();
    let outer = quad.outer();
    let inner = quad.inner();

    let sd_at_look = sigma * m.sqrt();
    let mut breaks = h.jumps();
    breaks.extend(stop_jumps.iter().map(|j| (j - centre) / sd_at_look));
    let at_look = outer.expect(&breaks, |u| {
        let hv = h.eval(u);
        if hv == 0.0 {
            return 0.0;
        }
        hv * weight(centre + sd_at_look * u)
    });

    let along = sigma * m / big_m.sqrt();
    let residual = sigma * (m * (big_m - m) / big_m).sqrt();
    let via_final = outer.expect(&h.jumps(), |u| {
        let hv = h.eval(u);
        if hv == 0.0 {
            return 0.0;
        }
        let loc = centre + along * u;
        let inner_breaks: Vec<f64> = stop_jumps.iter().map(|j| (j - loc) / residual).collect();
        hv * inner.expect(&inner_breaks, |v| weight(loc + residual * v))
    });
    at_look - via_final
}

/// `sup_x |P(z ≤ x) − Φ(x)|` computed from [`rhs_transform`] with
/// `h = 1_{(−∞, x]}`: a grid scan on `[−6, 6]` refined by golden-section
/// search. Deterministic when the trial has at most three interim looks.
pub fn ks_by_identity(config: &TrialConfig, quad: &QuadratureSpec) -> Result<f64> {
    let f = |x: f64| {
        rhs_transform(config, TestFunction::IndicatorLeq(x), quad, 0).map(|e| e.value.abs())
    };
    let step = 0.05;
    let scan: Vec<(f64, f64)> = (-120..=120)
        .into_par_iter()
        .map(|k| {
            let x = k as f64 * step;
            f(x).map(|v| (x, v))
        })
        .collect::<Result<_>>()?;
    let best = scan.into_iter().fold(
        (0.0, f64::NEG_INFINITY),
        |a, b| if b.1 > a.1 { b } else { a },
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    for _ in 0..40 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if f(x1)? >= f(x2)? {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(best.1.max(f(0.5 * (a + b))?))
}

/// Which evaluation of the right side a check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsRoute {
    Transform,
    Coefficients,
}

/// Outcome of one identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub h: TestFunction,
    pub route: RhsRoute,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub abs_diff: f64,
    pub combined_se: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(h: TestFunction, route: RhsRoute, lhs: Estimate, rhs: Estimate) -> Self {
        let abs_diff = (lhs.value - rhs.value).abs();
        let combined_se = lhs.std_error.hypot(rhs.std_error);
        let tolerance = CHECK_SIGMAS * combined_se + QUADRATURE_BUDGET;
        IdentityReport {
            h,
            route,
            lhs,
            rhs,
            abs_diff,
            combined_se,
            tolerance,
            pass: abs_diff <= tolerance,
        }
    }
}

/// Checks the identity for several test functions against one simulated
/// batch. The right side draws from streams derived from `seed`, disjoint
/// from the batch's.
pub fn verify_identities(
    config: &TrialConfig,
    tests: &[TestFunction],
    replications: usize,
    quad: &QuadratureSpec,
    seed: u64,
    route: RhsRoute,
) -> Result<Vec<IdentityReport>> {
    tests.iter().try_for_each(TestFunction::validate)?;
    let samples = simulate_batch(config, replications, seed)?;
    let rhs_seed = derive_seed(seed, 0x7268_7300);
    tests
        .iter()
        .map(|&h| {
            let lhs = discrepancy_from_samples(&samples, h);
            let rhs = match route {
                RhsRoute::Transform => rhs_transform(config, h, quad, rhs_seed)?,
                RhsRoute::Coefficients => rhs_coefficients(config, h, quad.mc_samples, rhs_seed)?,
            };
            Ok(IdentityReport::new(h, route, lhs, rhs))
        })
        .collect()
}

pub fn verify_identity(
    config: &TrialConfig,
    h: TestFunction,
    replications: usize,
    quad: &QuadratureSpec,
    seed: u64,
    route: RhsRoute,
) -> Result<IdentityReport> {
    Ok(verify_identities(config, &[h], replications, quad, seed, route)?.remove(0))
}
