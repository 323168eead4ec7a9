//! Stopping maps `ψ : ℝ → [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed family of stopping maps used by the simulator and the
/// numerical checks. Every member is piecewise constant with finitely many
/// jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiSpec {
    /// `1` iff `x >= c`.
    #[serde(alias = "one_sided")]
    OneSidedThreshold {
        #[serde(rename = "C")]
        c: f64,
    },
    /// `1` iff `|x| >= c`.
    #[serde(alias = "two_sided")]
    TwoSidedThreshold {
        #[serde(rename = "C")]
        c: f64,
    },
    /// `1` iff `x <= 0`.
    LeftIndicator,
    /// The constant map `p`.
    Constant { p: f64 },
}

impl PsiSpec {
    pub fn one_sided(c: f64) -> Self {
        PsiSpec::OneSidedThreshold { c }
    }

    pub fn two_sided(c: f64) -> Self {
        PsiSpec::TwoSidedThreshold { c }
    }

    pub fn constant(p: f64) -> Self {
        PsiSpec::Constant { p }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PsiSpec::OneSidedThreshold { c } | PsiSpec::TwoSidedThreshold { c } => {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::config(
                        "psi.C",
                        format!("must be finite and >= 0, got {c}"),
                    ));
                }
            }
            PsiSpec::Constant { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(
                        "psi.p",
                        format!("must lie in [0, 1], got {p}"),
                    ));
                }
            }
            PsiSpec::LeftIndicator => {}
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PsiSpec::OneSidedThreshold { c } => indicator(x >= c),
            PsiSpec::TwoSidedThreshold { c } => indicator(x.abs() >= c),
            PsiSpec::LeftIndicator => indicator(x <= 0.0),
            PsiSpec::Constant { p } => p,
        }
    }

    /// Points where the map jumps, in increasing order.
    pub fn jumps(&self) -> Vec<f64> {
        match *self {
            PsiSpec::OneSidedThreshold { c } => vec![c],
            PsiSpec::TwoSidedThreshold { c } if c > 0.0 => vec![-c, c],
            PsiSpec::TwoSidedThreshold { .. } => Vec::new(),
            PsiSpec::LeftIndicator => vec![0.0],
            PsiSpec::Constant { .. } => Vec::new(),
        }
    }

    /// `lim_{y → x} ψ(y)`, or `None` when the map jumps at `x`.
    pub fn limit_at(&self, x: f64) -> Option<f64> {
        if self.jumps().contains(&x) {
            None
        } else {
            Some(self.eval(x))
        }
    }

    /// Limits at `-∞` and `+∞`. Always finite for this family.
    pub fn limits_at_infinity(&self) -> (f64, f64) {
        let far = self.jumps().iter().fold(1.0_f64, |acc, j| acc.max(j.abs())) * 2.0 + 1.0;
        (self.eval(-far), self.eval(far))
    }

    /// Threshold constant for the threshold variants.
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            PsiSpec::OneSidedThreshold { c } | PsiSpec::TwoSidedThreshold { c } => Some(c),
            _ => None,
        }
    }

    /// Short label used in file names and CSV rows.
    pub fn side_label(&self) -> &'static str {
        match self {
            PsiSpec::OneSidedThreshold { .. } => "one",
            PsiSpec::TwoSidedThreshold { .. } => "two",
            PsiSpec::LeftIndicator => "left",
            PsiSpec::Constant { .. } => "const",
        }
    }
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}
