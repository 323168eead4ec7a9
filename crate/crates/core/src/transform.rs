//! The normal transform `𝒩_{B,μ,σ}` and the continuation probabilities of a
//! trial.
//!
//! For maps `B = (b_1, …, b_i)` and block sizes `x_1, …, x_{i+1}`, the
//! transform at `x` is the expectation of `∏_j b_j(S_j)` for a Gaussian
//! random walk with increments `N(μ x_j, σ² x_j)`, conditioned on the final
//! sum `S_{i+1} = x`. Two independent evaluations are provided:
//!
//! * [`normal_transform_direct`] integrates the defining ratio of densities
//!   over `z_1, …, z_i` (iterated, one dimension at a time).
//! * [`normal_transform_recursive`] folds the last map into the previous one
//!   with one-dimensional bridge expectations until a single map remains.
//!
//! Both rely on the maps being step functions with known jumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::psi::PsiSpec;
use crate::quadrature::{step_expectation, GaussianIntegrator};
use crate::trial::TrialConfig;

/// Largest tuple the direct route accepts.
pub const DIRECT_MAX_MAPS: usize = 3;

/// A `[0, 1]`-valued step function built from stopping maps.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundedMap {
    Psi(PsiSpec),
    /// `1 − b`.
    Complement(Box<BoundedMap>),
    /// Pointwise product.
    Product(Vec<BoundedMap>),
    /// `x ↦ b((x − shift) / scale)`, `scale > 0`.
    Affine {
        inner: Box<BoundedMap>,
        shift: f64,
        scale: f64,
    },
}

impl BoundedMap {
    /// The constant map `1`.
    pub fn ones() -> Self {
        BoundedMap::Psi(PsiSpec::constant(1.0))
    }

    pub fn complement_of(psi: PsiSpec) -> Self {
        BoundedMap::Complement(Box::new(BoundedMap::Psi(psi)))
    }

    pub fn affine(self, shift: f64, scale: f64) -> Self {
        BoundedMap::Affine {
            inner: Box::new(self),
            shift,
            scale,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BoundedMap::Psi(psi) => psi.eval(x),
            BoundedMap::Complement(b) => 1.0 - b.eval(x),
            BoundedMap::Product(bs) => bs.iter().map(|b| b.eval(x)).product(),
            BoundedMap::Affine {
                inner,
                shift,
                scale,
            } => inner.eval((x - shift) / scale),
        }
    }

    /// Jump locations (possibly with duplicates).
    pub fn jumps(&self) -> Vec<f64> {
        match self {
            BoundedMap::Psi(psi) => psi.jumps(),
            BoundedMap::Complement(b) => b.jumps(),
            BoundedMap::Product(bs) => bs.iter().flat_map(|b| b.jumps()).collect(),
            BoundedMap::Affine {
                inner,
                shift,
                scale,
            } => inner
                .jumps()
                .into_iter()
                .map(|j| shift + scale * j)
                .collect(),
        }
    }

    /// Exact `E[b(loc + scale·ξ)]`.
    pub fn gaussian_mean(&self, loc: f64, scale: f64) -> f64 {
        let breaks: Vec<f64> = self
            .jumps()
            .into_iter()
            .map(|j| (j - loc) / scale)
            .collect();
        step_expectation(&breaks, |u| self.eval(loc + scale * u))
    }

    fn validate(&self) -> Result<()> {
        match self {
            BoundedMap::Psi(psi) => psi.validate(),
            BoundedMap::Complement(b) => b.validate(),
            BoundedMap::Product(bs) => bs.iter().try_for_each(BoundedMap::validate),
            BoundedMap::Affine {
                inner,
                shift,
                scale,
            } => {
                if !(scale.is_finite() && *scale > 0.0 && shift.is_finite()) {
                    return Err(Error::arg(format!(
                        "affine map needs finite shift and scale > 0, got ({shift}, {scale})"
                    )));
                }
                inner.validate()
            }
        }
    }
}

/// Node budgets for the deterministic routes and sample sizes for
/// Monte Carlo cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Evaluation budget per outer integration dimension.
    pub nodes: usize,
    /// Budget for the innermost dimension, which carries the jumps of the
    /// last map and the conditioning density.
    pub inner_nodes: usize,
    pub mc_samples: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes: 64,
            inner_nodes: 256,
            mc_samples: 100_000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 || self.inner_nodes < 8 {
            return Err(Error::arg(format!(
                "quadrature needs at least 8 nodes per dimension, got {}/{}",
                self.nodes, self.inner_nodes
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::arg("mc_samples must be positive"));
        }
        Ok(())
    }

    pub(crate) fn outer(&self) -> GaussianIntegrator {
        GaussianIntegrator::with_nodes(self.nodes)
    }

    pub(crate) fn inner(&self) -> GaussianIntegrator {
        GaussianIntegrator::with_nodes(self.inner_nodes)
    }
}

fn check_inputs(maps: &[BoundedMap], sigma: f64, x_parts: &[f64], x: f64) -> Result<()> {
    if maps.is_empty() {
        return Err(Error::arg("normal transform needs at least one map"));
    }
    if x_parts.len() != maps.len() + 1 {
        return Err(Error::arg(format!(
            "{} maps need {} block sizes, got {}",
            maps.len(),
            maps.len() + 1,
            x_parts.len()
        )));
    }
    if let Some(bad) = x_parts.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::arg(format!(
            "block sizes must be positive, got {bad}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
    }
    if !x.is_finite() {
        return Err(Error::arg("x must be finite"));
    }
    maps.iter().try_for_each(BoundedMap::validate)
}

/// Evaluates the defining integral, one walk increment per dimension.
///
/// Dimension `j` is standardized as `z_j = μ x_j + σ √x_j u_j`; the ratio of
/// the last increment's density to the density of the full sum stays in the
/// innermost integrand.
pub fn normal_transform_direct(
    maps: &[BoundedMap],
    mu: f64,
    sigma: f64,
    x_parts: &[f64],
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(maps, sigma, x_parts, x)?;
    quad.validate()?;
    if maps.len() > DIRECT_MAX_MAPS {
        return Err(Error::DimensionTooLarge {
            max: DIRECT_MAX_MAPS,
            got: maps.len(),
        });
    }
    let total: f64 = x_parts.iter().sum();
    let direct = Direct {
        maps,
        mu,
        sigma,
        x_parts,
        x,
        ln_denominator: normal::ln_density(x, mu * total, sigma * total.sqrt()),
        outer: quad.outer(),
        inner: quad.inner(),
    };
    Ok(direct.level(0, 0.0))
}

struct Direct<'a> {
    maps: &'a [BoundedMap],
    mu: f64,
    sigma: f64,
    x_parts: &'a [f64],
    x: f64,
    ln_denominator: f64,
    outer: GaussianIntegrator,
    inner: GaussianIntegrator,
}

impl Direct<'_> {
    /// Integral over `z_{j+1}, …, z_i` given the partial sum `S_j = partial`.
    fn level(&self, j: usize, partial: f64) -> f64 {
        let last = j + 1 == self.maps.len();
        let xj = self.x_parts[j];
        let loc = partial + self.mu * xj;
        let scale = self.sigma * xj.sqrt();
        let map = &self.maps[j];

        let mut breaks: Vec<f64> = map.jumps().into_iter().map(|t| (t - loc) / scale).collect();
        // The remaining conditioning mass is a Gaussian bump in u_j centred
        // where S_j hits the conditional mean of the rest of the walk.
        let rest: f64 = self.x_parts[j + 1..].iter().sum();
        let centre = (self.x - self.mu * rest - loc) / scale;
        let width = (rest / xj).sqrt();
        breaks
            .extend([-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0].map(|k| centre + k * width));

        if last {
            let tail = self.x_parts[j + 1];
            let tail_mean = self.mu * tail;
            let tail_sd = self.sigma * tail.sqrt();
            self.inner.expect(&breaks, |u| {
                let s = loc + scale * u;
                let b = map.eval(s);
                if b == 0.0 {
                    return 0.0;
                }
                b * (normal::ln_density(self.x - s, tail_mean, tail_sd) - self.ln_denominator).exp()
            })
        } else {
            self.outer.expect(&breaks, |u| {
                let s = loc + scale * u;
                let b = map.eval(s);
                if b == 0.0 {
                    return 0.0;
                }
                b * self.level(j + 1, s)
            })
        }
    }
}

/// A step map times a smooth factor, as produced by folding.
trait Folding {
    fn eval(&self, z: f64, integ: &GaussianIntegrator) -> f64;
    /// `E[f(loc + scale·ξ)]`.
    fn gaussian_mean(&self, loc: f64, scale: f64, integ: &GaussianIntegrator) -> f64;
}

impl Folding for BoundedMap {
    fn eval(&self, z: f64, _: &GaussianIntegrator) -> f64 {
        BoundedMap::eval(self, z)
    }

    fn gaussian_mean(&self, loc: f64, scale: f64, _: &GaussianIntegrator) -> f64 {
        BoundedMap::gaussian_mean(self, loc, scale)
    }
}

/// `b̃(z) = b(z) · E[next(coef·z + offset + spread·ξ)]`.
struct Folded {
    base: BoundedMap,
    next: Box<dyn Folding>,
    coef: f64,
    offset: f64,
    spread: f64,
}

impl Folding for Folded {
    fn eval(&self, z: f64, integ: &GaussianIntegrator) -> f64 {
        let b = self.base.eval(z);
        if b == 0.0 {
            return 0.0;
        }
        b * self
            .next
            .gaussian_mean(self.coef * z + self.offset, self.spread, integ)
    }

    fn gaussian_mean(&self, loc: f64, scale: f64, integ: &GaussianIntegrator) -> f64 {
        let breaks: Vec<f64> = self
            .base
            .jumps()
            .into_iter()
            .map(|t| (t - loc) / scale)
            .collect();
        integ.expect(&breaks, |u| self.eval(loc + scale * u, integ))
    }
}

/// Evaluates the transform by repeatedly folding the last map into its
/// predecessor (merging the last two block sizes) and finishing with the
/// one-map bridge expectation
/// `E[b(x_1/(x_1+x_2)·x + σ √(x_1 x_2/(x_1+x_2)) ξ)]`.
///
/// `μ` is accepted for symmetry with the direct route; the conditioned walk
/// does not depend on it.
pub fn normal_transform_recursive(
    maps: &[BoundedMap],
    _mu: f64,
    sigma: f64,
    x_parts: &[f64],
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(maps, sigma, x_parts, x)?;
    quad.validate()?;
    let integ = quad.outer();
    let mut parts = x_parts.to_vec();
    let mut current: Box<dyn Folding> = Box::new(maps[maps.len() - 1].clone());
    for r in (2..=maps.len()).rev() {
        let (xr, xr1) = (parts[r - 1], parts[r]);
        let merged = xr + xr1;
        current = Box::new(Folded {
            base: maps[r - 2].clone(),
            next: current,
            coef: xr1 / merged,
            offset: xr / merged * x,
            spread: sigma * (xr * xr1 / merged).sqrt(),
        });
        parts.pop();
        parts[r - 1] = merged;
    }
    let (x1, x2) = (parts[0], parts[1]);
    let merged = x1 + x2;
    Ok(current.gaussian_mean(x1 / merged * x, sigma * (x1 * x2 / merged).sqrt(), &integ))
}

/// Continuation maps `1 − ψ_{m_j}` for looks `1..look`, where
/// `ψ_m(x) = ψ((x − μ₀ m)/m^γ)`.
pub fn continuation_maps(config: &TrialConfig, look: usize) -> Vec<BoundedMap> {
    (1..look)
        .map(|j| {
            let m = config.look_size(j) as f64;
            BoundedMap::complement_of(config.psi).affine(config.null_mean * m, m.powf(config.gamma))
        })
        .collect()
}

/// Block sizes `m_1, m_2 − m_1, …, m_look − m_{look−1}`.
pub fn look_increments(config: &TrialConfig, look: usize) -> Vec<f64> {
    (1..=look)
        .map(|j| {
            let prev = if j == 1 { 0 } else { config.look_size(j - 1) };
            (config.look_size(j) - prev) as f64
        })
        .collect()
}

/// Probability that the trial passed looks `1..look` without stopping,
/// given the running sum at look `look` equals `x`. Equals `1` at the
/// first look.
pub fn continuation_probability(
    config: &TrialConfig,
    look: usize,
    x: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    config.validate()?;
    let interim = config.interim_looks();
    if look == 0 || look > interim {
        return Err(Error::arg(format!(
            "look must lie in 1..={interim}, got {look}"
        )));
    }
    if look == 1 {
        return Ok(1.0);
    }
    normal_transform_recursive(
        &continuation_maps(config, look),
        config.mu,
        config.sigma,
        &look_increments(config, look),
        x,
        quad,
    )
}
