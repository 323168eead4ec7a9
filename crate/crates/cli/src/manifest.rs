use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const FILE_NAME: &str = "manifest.toml";

/// Everything needed to reproduce an output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub reps: usize,
    pub outputs: Vec<String>,
    pub config: C,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(subcommand: &'static str, seed: u64, reps: usize, config: C) -> Self {
        RunManifest {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            reps,
            outputs: Vec::new(),
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = toml::to_string(self)
            .map_err(|e| CliError::Invalid(format!("cannot serialize manifest: {e}")))?;
        let path = dir.join(FILE_NAME);
        fs::write(&path, text).map_err(|e| CliError::writing(&path, e))
    }
}
