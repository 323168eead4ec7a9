mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use seqnorm_core::Sampling;

#[derive(Parser)]
#[command(
    name = "seqnorm",
    version,
    about = "Group sequential trial simulations and numerical checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial design and summarize the normalized sample mean.
    Simulate {
        /// TOML file with keys mu, sigma, gamma, looks, n, psi.kind, psi.C / psi.p and optionally mu0.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reps: usize,
        /// Drawn from the operating system when absent; recorded in the manifest.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write every replicate's z value to z.tsv.
        #[arg(long)]
        dump_z: bool,
        /// Critical value x of the interval mean ± x·sigma/sqrt(N).
        #[arg(long, default_value_t = 1.96)]
        critical: f64,
        #[arg(long, value_enum, default_value = "observations")]
        sampling: SamplingArg,
    },
    /// Run the simulation study grid.
    Study {
        /// `default` or a TOML file overriding fields of the default grid.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; all available cores when absent.
        #[arg(long)]
        threads: Option<usize>,
        /// Skip the per-cell histogram files.
        #[arg(long)]
        no_histograms: bool,
    },
    /// Check the distributional identity and the closed-form examples.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = seqnorm_core::verification::DEFAULT_REPLICATIONS)]
        reps: usize,
        /// Directory for report.txt and the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Observations,
    BlockSums,
}

impl From<SamplingArg> for Sampling {
    fn from(s: SamplingArg) -> Self {
        match s {
            SamplingArg::Observations => Sampling::Observations,
            SamplingArg::BlockSums => Sampling::BlockSums,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// The identity with its right side from the normal transform.
    #[value(alias = "theorem2")]
    Transform,
    /// The identity with its right side from sampled coefficient variables.
    #[value(alias = "theorem5")]
    Coefficients,
    /// Closed-form examples.
    Oracles,
    All,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            reps,
            seed,
            out,
            dump_z,
            critical,
            sampling,
        } => commands::simulate(&config, reps, seed, &out, dump_z, critical, sampling.into()),
        Command::Study {
            grid,
            reps,
            seed,
            out_dir,
            threads,
            no_histograms,
        } => commands::study(&grid, reps, seed, &out_dir, threads, !no_histograms),
        Command::Verify {
            suite,
            seed,
            reps,
            out,
        } => commands::verify(suite, seed, reps, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
