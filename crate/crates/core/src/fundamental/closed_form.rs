//! Closed forms for two small designs with looks `(1, 2)`, `μ = 0`, `σ = 1`.
//!
//! Example 1 uses a two-sided threshold `C` with `γ = 1/2`; example 2 stops
//! at the first look exactly when the running sum is non-positive.

use crate::error::{Error, Result};
use crate::normal::{cdf, interval_mass};
use crate::transform::QuadratureSpec;

/// `P(z ≤ x) − Φ(x)` for example 1:
/// `E_η[Φ((√2C − η) ∧ x) − Φ((−√2C − η) ∧ x)] − [Φ(C ∧ x) − Φ(−C ∧ x)]`.
pub fn example1_discrepancy(c: f64, x: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::arg(format!("threshold must be positive, got {c}")));
    }
    if x.is_nan() {
        return Err(Error::arg("x is NaN"));
    }
    let r = std::f64::consts::SQRT_2 * c;
    let continued = quad.outer().expect(&[r - x, -r - x], |eta| {
        cdf((r - eta).min(x)) - cdf((-r - eta).min(x))
    });
    Ok(continued - (cdf(c.min(x)) - cdf((-c).min(x))))
}

/// `sup_x |P(z ≤ x) − Φ(x)|` for example 1, by a grid scan refined with a
/// golden-section search.
pub fn example1_ks(c: f64, quad: &QuadratureSpec) -> Result<f64> {
    let f = |x: f64| example1_discrepancy(c, x, quad).map(f64::abs);
    let step = 0.01;
    let mut best = (0.0, f(0.0)?);
    for k in -800..=800 {
        let x = k as f64 * step;
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    for _ in 0..60 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if f(x1)? >= f(x2)? {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(best.1.max(f(0.5 * (a + b))?))
}

/// `[Φ(√2C) − 1/2][Φ(−C) − Φ(−2C)]`, a lower bound on example 1's KS distance.
pub fn example1_lower_bound(c: f64) -> f64 {
    (cdf(std::f64::consts::SQRT_2 * c) - 0.5) * (cdf(-c) - cdf(-2.0 * c))
}

/// `P(z ≤ x) − Φ(x) = Φ(x ∧ 0) − Φ(x) + Φ(x)²/2` for example 2.
pub fn example2_discrepancy(x: f64) -> f64 {
    let p = cdf(x);
    cdf(x.min(0.0)) - p + 0.5 * p * p
}

/// `sup_x |P(z ≤ x) − Φ(x)|` for example 2. The discrepancy is `Φ(x)²/2` for
/// `x ≤ 0` and `(1 − Φ(x))²/2` for `x > 0`, so the supremum `1/8` sits at 0.
pub fn example2_ks() -> f64 {
    example2_discrepancy(0.0)
}

/// `P(|z| ≤ x)` for example 2.
pub fn example2_coverage(x: f64) -> f64 {
    interval_mass(-x, x) + example2_discrepancy(x) - example2_discrepancy(-x)
}
