//! Verification suites: the distributional identity on a grid of designs
//! through either evaluation of its right side, and the closed-form
//! examples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::Side;
use crate::fundamental::{
    example1_discrepancy, example1_ks, example1_lower_bound, example2_ks, rhs_transform,
    verify_identities, IdentityReport, RhsRoute, TestFunction,
};
use crate::metrics::{empirical_ks, ks_standard_error};
use crate::psi::PsiSpec;
use crate::seed::derive_seed;
use crate::transform::QuadratureSpec;
use crate::trial::{simulate_batch, TrialConfig};

pub const DEFAULT_REPLICATIONS: usize = 100_000;

/// Designs on which the identity is checked: one and two interim looks,
/// `γ ∈ {0, 1/2, 1}`, `μ ∈ {0, 1}`, `C ∈ {1, 2}`, both sides,
/// `n ∈ {10, 50}`, `σ = 1`.
pub fn identity_grid() -> Vec<TrialConfig> {
    let mut out = Vec::new();
    for looks in [vec![1, 2], vec![1, 2, 3]] {
        for gamma in [0.0, 0.5, 1.0] {
            for mu in [0.0, 1.0] {
                for c in [1.0, 2.0] {
                    for side in [Side::One, Side::Two] {
                        for n in [10, 50] {
                            out.push(TrialConfig::new(
                                mu,
                                1.0,
                                gamma,
                                looks.clone(),
                                n,
                                side.psi(c),
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn identity_tests() -> [TestFunction; 2] {
    [
        TestFunction::IndicatorLeq(0.0),
        TestFunction::IndicatorAbsLeq(1.96),
    ]
}

/// Outcome of one design on the identity grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub config: TrialConfig,
    pub seed: u64,
    pub reports: Vec<IdentityReport>,
}

/// Checks the identity on [`identity_grid`]; design `i` uses seed
/// `derive_seed(seed, i)`.
pub fn identity_suite(
    route: RhsRoute,
    seed: u64,
    replications: usize,
    quad: &QuadratureSpec,
) -> Result<Vec<IdentityCase>> {
    identity_grid()
        .into_par_iter()
        .enumerate()
        .map(|(i, config)| {
            let cell_seed = derive_seed(seed, i as u64);
            let reports = verify_identities(
                &config,
                &identity_tests(),
                replications,
                quad,
                cell_seed,
                route,
            )?;
            Ok(IdentityCase {
                config,
                seed: cell_seed,
                reports,
            })
        })
        .collect()
}

/// A named pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            detail: detail.into(),
            pass,
        }
    }
}

pub fn identity_checks(cases: &[IdentityCase]) -> Vec<Check> {
    cases
        .iter()
        .flat_map(|case| {
            let c = &case.config;
            case.reports.iter().map(move |r| {
                Check::new(
                    format!(
                        "identity {:?} mu={} gamma={} looks={:?} n={} psi={}({}) h={}",
                        r.route,
                        c.mu,
                        c.gamma,
                        c.looks,
                        c.n,
                        c.psi.side_label(),
                        c.psi.threshold().unwrap_or(f64::NAN),
                        r.h.label()
                    ),
                    r.pass,
                    format!(
                        "lhs {:.6} ± {:.6}, rhs {:.6} ± {:.6}, |diff| {:.2e} <= {:.2e}",
                        r.lhs.value,
                        r.lhs.std_error,
                        r.rhs.value,
                        r.rhs.std_error,
                        r.abs_diff,
                        r.tolerance
                    ),
                )
            })
        })
        .collect()
}

/// Sizes at which the closed-form examples are simulated.
pub const EXAMPLE2_SIZES: [u64; 3] = [10, 50, 500];
pub const EXAMPLE1_SIZES: [u64; 4] = [10, 50, 100, 500];
pub const EXAMPLE_KS_TOLERANCE: f64 = 0.01;

pub fn example2_config(n: u64) -> TrialConfig {
    TrialConfig::new(0.0, 1.0, 0.5, vec![1, 2], n, PsiSpec::LeftIndicator)
}

pub fn example1_config(c: f64, n: u64) -> TrialConfig {
    TrialConfig::new(0.0, 1.0, 0.5, vec![1, 2], n, PsiSpec::two_sided(c))
}

/// Closed-form examples: the exact value `1/8`, agreement of the transform
/// route with the first example's display, the lower bound of the first
/// example against its exact distance, and simulated distances for both.
pub fn oracle_checks(seed: u64, replications: usize, quad: &QuadratureSpec) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ks2 = example2_ks();
    out.push(Check::new(
        "example 2 exact distance",
        ks2 == 0.125,
        format!("{ks2} == 0.125"),
    ));

    for (k, &n) in EXAMPLE2_SIZES.iter().enumerate() {
        let z = simulate_batch(
            &example2_config(n),
            replications,
            derive_seed(seed, 200 + k as u64),
        )?
        .z_values();
        let ks = empirical_ks(&z)?;
        out.push(Check::new(
            format!("example 2 simulated distance n={n}"),
            (ks - 0.125).abs() <= EXAMPLE_KS_TOLERANCE,
            format!(
                "{ks:.5} within 0.125 ± {EXAMPLE_KS_TOLERANCE} (SE {:.5})",
                ks_standard_error(replications)
            ),
        ));
    }

    for c in [1.0, 2.0] {
        let config = example1_config(c, 10);
        let mut worst = 0.0f64;
        for x in [-2.5, -1.0, -0.3, 0.0, 0.4, 1.2, 2.5] {
            let rhs = rhs_transform(&config, TestFunction::IndicatorLeq(x), quad, 0)?.value;
            worst = worst.max((rhs - example1_discrepancy(c, x, quad)?).abs());
        }
        out.push(Check::new(
            format!("example 1 display vs transform route C={c}"),
            worst <= 1e-8,
            format!("max |diff| {worst:.2e} <= 1e-8"),
        ));

        let bound = example1_lower_bound(c);
        let exact = example1_ks(c, quad)?;
        out.push(Check::new(
            format!("example 1 bound C={c}"),
            exact >= bound,
            format!("exact distance {exact:.5} >= bound {bound:.5}"),
        ));
        for (k, &n) in EXAMPLE1_SIZES.iter().enumerate() {
            let z = simulate_batch(
                &example1_config(c, n),
                replications,
                derive_seed(seed, 100 + 10 * c as u64 + k as u64),
            )?
            .z_values();
            let ks = empirical_ks(&z)?;
            out.push(Check::new(
                format!("example 1 simulated distance C={c} n={n}"),
                ks >= bound - EXAMPLE_KS_TOLERANCE,
                format!("{ks:.5} >= {bound:.5} - {EXAMPLE_KS_TOLERANCE} (exact {exact:.5})"),
            ));
        }
    }
    Ok(out)
}
