//! Simulation and numerical verification for estimation after group
//! sequential trials with normal outcomes.

pub mod error;
pub mod experiments;
pub mod fundamental;
pub mod metrics;
pub mod normal;
pub mod psi;
pub mod quadrature;
pub mod seed;
pub mod transform;
pub mod trial;
pub mod verification;

pub use error::{Error, Result};
pub use experiments::{run_study, run_study_with_histograms, Side, StudyGrid, TheoremCase};
pub use fundamental::{Estimate, IdentityReport, RhsRoute, TestFunction};
pub use metrics::{empirical_ks, summarize, StudyRow};
pub use psi::PsiSpec;
pub use transform::QuadratureSpec;
pub use trial::{
    simulate_batch, simulate_batch_with, simulate_trial, SampleSet, Sampling, TrialConfig,
    TrialResult,
};
