//! Standard normal distribution helpers.

use libm::erfc;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// One standard normal variate (ziggurat).
#[inline]
pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Standard normal CDF, evaluated through `erfc` so that both tails keep
/// full relative precision.
pub fn cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Log of the density of `N(mean, sd^2)` at `x`.
pub(crate) fn ln_density(x: f64, mean: f64, sd: f64) -> f64 {
    let u = (x - mean) / sd;
    -0.5 * u * u - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// `P[lo < ξ <= hi]` for standard normal `ξ`, computed on the tail where
/// the difference is least affected by cancellation.
pub fn interval_mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        cdf(-lo) - cdf(-hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_values() {
        assert_relative_eq!(cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(cdf(1.96), 0.975_002_104_851_780, max_relative = 1e-13);
        assert_relative_eq!(cdf(-1.0), 0.158_655_253_931_457_05, max_relative = 1e-13);
        assert_relative_eq!(cdf(-8.0), 6.220_960_574_271_785e-16, max_relative = 1e-12);
        assert_eq!(cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn interval_mass_is_symmetric() {
        assert_relative_eq!(
            interval_mass(-1.0, 1.0),
            0.682_689_492_137_085_9,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            interval_mass(7.0, 8.0),
            interval_mass(-8.0, -7.0),
            max_relative = 1e-12
        );
        assert_eq!(interval_mass(1.0, 1.0), 0.0);
    }
}
