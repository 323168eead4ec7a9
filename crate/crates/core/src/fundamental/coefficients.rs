//! The identity's right side in terms of coefficient variables.
//!
//! Write `k_1 < … < k_{L+1}` for the base looks, `K = k_{L+1}`, `μ_e = μ − μ₀`
//! and `ξ`, `η` for independent standard normals. Then
//!
//! ```text
//! E[h(z)] − E[h(ξ)] = Σ_i E[ h(ξ) (R_i − R̃_i) ]
//! R_i = ψ(k_i^{1−γ} n^{1−γ} μ_e + α_i n^{1/2−γ}) · Π_{j<i} (1 − ψ)(k_j^{1−γ} n^{1−γ} μ_e + β_{ij} n^{1/2−γ})
//! ```
//!
//! with `α_i = σ k_i^{1/2−γ} ξ`, `β_{ij} = σ k_j^{1−γ} ξ / √k_i + σ_{ij}` and
//! `σ_{ij} = ρ_{ij} / k_j^γ`. `R̃_i` uses `γ_i`, `δ_{ij}`, which are `α_i`,
//! `β_{ij}` with `ξ` replaced by `√(k_i/K) ξ + √((K − k_i)/K) η`.

use rand::Rng;
use rayon::prelude::*;

use super::{Estimate, TestFunction};
use crate::error::{Error, Result};
use crate::normal;
use crate::seed::{derive_seed, stream_rng};
use crate::trial::TrialConfig;

const CHUNK: usize = 4096;

/// Draws the offsets of a Gaussian bridge at the interior partial sums.
///
/// `increments` are the block sizes `x_1, …, x_i` of a random walk with
/// step variance `σ²`. Given the total, the partial sum after `j` blocks
/// equals `(m_j/m_i)` times the total plus `ρ_j`; this returns
/// `ρ_1, …, ρ_{i−1}`, built backward from `ρ_i = 0` by
/// `ρ_j = (m_j/m_{j+1}) ρ_{j+1} + σ √(m_j x_{j+1} / m_{j+1}) ξ_j`.
pub fn sample_bridge_offsets<R: Rng + ?Sized>(
    increments: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if increments.len() < 2 {
        return Err(Error::arg(format!(
            "bridge offsets need at least two increments, got {}",
            increments.len()
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(bad) = increments.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::arg(format!(
            "increments must be positive, got {bad}"
        )));
    }
    let partial: Vec<f64> = increments
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let i = increments.len();
    let mut rho = vec![0.0; i - 1];
    let mut next = 0.0;
    for j in (0..i - 1).rev() {
        let (m_j, m_next) = (partial[j], partial[j + 1]);
        next = m_j / m_next * next
            + sigma * (m_j * increments[j + 1] / m_next).sqrt() * normal::draw(rng);
        rho[j] = next;
    }
    Ok(rho)
}

/// One joint draw of the coefficient variables for every interim look.
///
/// Row `i − 1` of the matrices holds the entries for look `i`, so it has
/// `i − 1` columns. The bridge offsets of different looks are drawn
/// independently, since each look's term only involves its own row.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub xi: f64,
    pub eta: f64,
    pub rho: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
}

impl CoefficientSample {
    pub fn draw<R: Rng + ?Sized>(
        config: &TrialConfig,
        xi: f64,
        eta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let k: Vec<f64> = config.looks.iter().map(|&v| v as f64).collect();
        let big_k = *k.last().expect("validated looks");
        let (s, g) = (config.sigma, config.gamma);
        let looks = config.interim_looks();
        let mut out = CoefficientSample {
            xi,
            eta,
            rho: Vec::with_capacity(looks),
            sigma: Vec::with_capacity(looks),
            alpha: Vec::with_capacity(looks),
            beta: Vec::with_capacity(looks),
            gamma: Vec::with_capacity(looks),
            delta: Vec::with_capacity(looks),
        };
        for i in 0..looks {
            let rho = if i == 0 {
                Vec::new()
            } else {
                let increments: Vec<f64> = (0..=i)
                    .map(|j| if j == 0 { k[0] } else { k[j] - k[j - 1] })
                    .collect();
                sample_bridge_offsets(&increments, s, rng)?
            };
            let sig: Vec<f64> = rho
                .iter()
                .enumerate()
                .map(|(j, r)| r / k[j].powf(g))
                .collect();
            let mixed = (k[i] / big_k).sqrt() * xi + ((big_k - k[i]) / big_k).sqrt() * eta;
            let lead = s * k[i].powf(0.5 - g);
            out.alpha.push(lead * xi);
            out.gamma.push(lead * mixed);
            let carry = |j: usize| s * k[j].powf(1.0 - g) / k[i].sqrt();
            out.beta.push(
                sig.iter()
                    .enumerate()
                    .map(|(j, v)| carry(j) * xi + v)
                    .collect(),
            );
            out.delta.push(
                sig.iter()
                    .enumerate()
                    .map(|(j, v)| carry(j) * mixed + v)
                    .collect(),
            );
            out.rho.push(rho);
            out.sigma.push(sig);
        }
        Ok(out)
    }

    /// `Σ_i (R_i − R̃_i)`.
    pub fn stop_difference(&self, config: &TrialConfig) -> f64 {
        let n = config.n as f64;
        let (g, drift) = (config.gamma, config.drift());
        let slow = n.powf(0.5 - g);
        let trend = |k: f64| k.powf(1.0 - g) * n.powf(1.0 - g) * drift;
        let psi = config.psi;
        let k: Vec<f64> = config.looks.iter().map(|&v| v as f64).collect();
        let term = |lead: f64, row: &[f64], i: usize| -> f64 {
            let stop = psi.eval(trend(k[i]) + lead * slow);
            if stop == 0.0 {
                return 0.0;
            }
            stop * row
                .iter()
                .enumerate()
                .map(|(j, b)| 1.0 - psi.eval(trend(k[j]) + b * slow))
                .product::<f64>()
        };
        (0..config.interim_looks())
            .map(|i| term(self.alpha[i], &self.beta[i], i) - term(self.gamma[i], &self.delta[i], i))
            .sum()
    }
}

/// Monte Carlo estimate of `Σ_i E[h(ξ)(R_i − R̃_i)]` from `samples` draws.
///
/// `ξ`, `η` and the bridge offsets come from separate streams derived
/// from `seed`, split into fixed-size chunks so the result does not depend
/// on the thread count.
pub fn rhs_coefficients(
    config: &TrialConfig,
    h: TestFunction,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    config.validate()?;
    h.validate()?;
    if samples == 0 {
        return Err(Error::arg("need at least one sample"));
    }
    let normals_seed = derive_seed(seed, 0x6e6f_726d);
    let offsets_seed = derive_seed(seed, 0x6272_6467);
    let chunks = samples.div_ceil(CHUNK);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<f64>> {
            let mut normals = stream_rng(normals_seed, c as u64);
            let mut offsets = stream_rng(offsets_seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .map(|_| {
                    let xi = normal::draw(&mut normals);
                    let eta = normal::draw(&mut normals);
                    let hv = h.eval(xi);
                    let coef = CoefficientSample::draw(config, xi, eta, &mut offsets)?;
                    Ok(if hv == 0.0 {
                        0.0
                    } else {
                        hv * coef.stop_difference(config)
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::PsiSpec;
    use crate::seed::stream_rng;

    #[test]
    fn bridge_offsets_reject_bad_input() {
        let mut rng = stream_rng(1, 0);
        assert!(sample_bridge_offsets(&[1.0], 1.0, &mut rng).is_err());
        assert!(sample_bridge_offsets(&[1.0, 1.0], 0.0, &mut rng).is_err());
        assert!(sample_bridge_offsets(&[1.0, -1.0], 1.0, &mut rng).is_err());
    }

    #[test]
    fn bridge_offset_covariance() {
        let mut rng = stream_rng(11, 0);
        let reps = 200_000;
        let (mut v1, mut v2, mut c12) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let r = sample_bridge_offsets(&[1.0, 1.0, 1.0], 1.0, &mut rng).unwrap();
            v1 += r[0] * r[0];
            v2 += r[1] * r[1];
            c12 += r[0] * r[1];
        }
        let m = reps as f64;
        // Cov(ρ_j, ρ_l) = m_j (m_i − m_l) / m_i for j <= l
        assert!((v1 / m - 2.0 / 3.0).abs() < 0.01, "{}", v1 / m);
        assert!((v2 / m - 2.0 / 3.0).abs() < 0.01, "{}", v2 / m);
        assert!((c12 / m - 1.0 / 3.0).abs() < 0.01, "{}", c12 / m);
    }

    #[test]
    fn coefficient_shapes_and_first_look() {
        let c = TrialConfig::new(
            0.0,
            2.0,
            0.25,
            vec![1, 2, 4, 5],
            10,
            PsiSpec::two_sided(1.0),
        );
        let mut rng = stream_rng(4, 0);
        let s = CoefficientSample::draw(&c, 0.7, -0.3, &mut rng).unwrap();
        assert_eq!(s.alpha.len(), 3);
        assert_eq!(
            s.beta.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(s.alpha[0], 2.0 * 0.7);
        let mixed = (0.2f64).sqrt() * 0.7 + (0.8f64).sqrt() * -0.3;
        assert!((s.gamma[0] - 2.0 * mixed).abs() < 1e-15);
        assert!((s.sigma[2][1] - s.rho[2][1] / 2f64.powf(0.25)).abs() < 1e-15);
    }
}
