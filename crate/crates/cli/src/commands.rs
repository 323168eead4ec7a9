use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use seqnorm_core::experiments::{emit_csv, write_histograms};
use seqnorm_core::verification::{identity_checks, identity_suite, oracle_checks, Check};
use seqnorm_core::{
    run_study, run_study_with_histograms, simulate_batch_with, summarize, QuadratureSpec, RhsRoute,
    Sampling, StudyGrid, TrialConfig,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::Suite;

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))
}

fn create_file(path: &Path) -> CliResult<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::writing(path, e))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::reading(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn require_reps(reps: usize) -> CliResult<()> {
    if reps == 0 {
        return Err(CliError::Invalid(
            "invalid `reps`: must be at least 1".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateConfig {
    trial: TrialConfig,
    sampling: Sampling,
    critical: f64,
    dump_z: bool,
}

pub fn simulate(
    config_path: &Path,
    reps: usize,
    seed: Option<u64>,
    out: &Path,
    dump_z: bool,
    critical: f64,
    sampling: Sampling,
) -> CliResult<()> {
    let config: TrialConfig = parse_toml(config_path)?;
    config.validate()?;
    require_reps(reps)?;
    let seed = match seed {
        Some(s) => s,
        // 63 bits keep the manifest readable by TOML parsers limited to i64
        None => {
            getrandom::u64()
                .map_err(|e| CliError::io("cannot draw a seed", std::io::Error::other(e)))?
                >> 1
        }
    };
    let samples = simulate_batch_with(&config, reps, seed, sampling)?;
    let row = summarize(&samples, critical)?;

    create_dir(out)?;
    let mut manifest = RunManifest::new(
        "simulate",
        seed,
        reps,
        SimulateConfig {
            trial: config,
            sampling,
            critical,
            dump_z,
        },
    );
    let summary = out.join("summary.csv");
    emit_csv(std::slice::from_ref(&row), create_file(&summary)?)?;
    manifest.outputs.push("summary.csv".into());
    if dump_z {
        let path = out.join("z.tsv");
        let mut w = create_file(&path)?;
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "replicate\tstop\tsample_size\tz")?;
            for (i, r) in samples.results.iter().enumerate() {
                writeln!(w, "{i}\t{}\t{}\t{}", r.stop_index, r.sample_size, r.z)?;
            }
            w.flush()
        };
        write().map_err(|e| CliError::writing(&path, e))?;
        manifest.outputs.push("z.tsv".into());
    }
    manifest.write(out)?;

    println!(
        "replications={} seed={} coverage={:.4} ks={:.4} avg_lower={:.4} avg_upper={:.4} avg_length={:.2}",
        row.replications, seed, row.coverage, row.ks, row.avg_lower, row.avg_upper, row.avg_length
    );
    let freq: Vec<String> = samples
        .stop_frequencies()
        .iter()
        .map(|f| format!("{f:.4}"))
        .collect();
    println!("stop frequencies by look: {}", freq.join(" "));
    Ok(())
}

pub fn study(
    grid_arg: &str,
    reps: usize,
    seed: u64,
    out_dir: &Path,
    threads: Option<usize>,
    histograms: bool,
) -> CliResult<()> {
    require_reps(reps)?;
    let base = if grid_arg == "default" {
        StudyGrid::default()
    } else {
        parse_toml(Path::new(grid_arg))?
    };
    let grid = StudyGrid {
        replications: reps,
        base_seed: seed,
        ..base
    };
    grid.validate()?;
    if threads == Some(0) {
        return Err(CliError::Invalid(
            "invalid `threads`: must be at least 1".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start worker threads: {e}")))?;

    create_dir(out_dir)?;
    let mut manifest = RunManifest::new("study", seed, reps, grid.clone());
    let rows = if histograms {
        let cells = pool.install(|| run_study_with_histograms(&grid))?;
        manifest.outputs.extend(write_histograms(out_dir, &cells)?);
        cells.into_iter().map(|(row, _)| row).collect()
    } else {
        pool.install(|| run_study(&grid))?
    };
    let csv_path = out_dir.join("study.csv");
    emit_csv(&rows, create_file(&csv_path)?)?;
    manifest.outputs.insert(0, "study.csv".into());
    manifest.write(out_dir)?;
    println!("{} cells written to {}", rows.len(), csv_path.display());
    Ok(())
}

#[derive(Serialize)]
struct VerifyConfig {
    suite: Suite,
    quadrature: QuadratureSpec,
}

pub fn verify(suite: Suite, seed: u64, reps: usize, out: Option<&Path>) -> CliResult<()> {
    require_reps(reps)?;
    let quad = QuadratureSpec::default();
    let mut checks: Vec<Check> = Vec::new();
    if matches!(suite, Suite::Oracles | Suite::All) {
        checks.extend(oracle_checks(seed, reps, &quad)?);
    }
    if matches!(suite, Suite::Transform | Suite::All) {
        checks.extend(identity_checks(&identity_suite(
            RhsRoute::Transform,
            seed,
            reps,
            &quad,
        )?));
    }
    if matches!(suite, Suite::Coefficients | Suite::All) {
        checks.extend(identity_checks(&identity_suite(
            RhsRoute::Coefficients,
            seed,
            reps,
            &quad,
        )?));
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    let mut report = String::new();
    for c in &checks {
        report.push_str(&format!(
            "{} {}: {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    report.push_str(&format!(
        "{} of {} checks passed\n",
        checks.len() - failed,
        checks.len()
    ));
    print!("{report}");

    if let Some(dir) = out {
        create_dir(dir)?;
        let path = dir.join("report.txt");
        fs::write(&path, &report).map_err(|e| CliError::writing(&path, e))?;
        let mut manifest = RunManifest::new(
            "verify",
            seed,
            reps,
            VerifyConfig {
                suite,
                quadrature: quad,
            },
        );
        manifest.outputs.push("report.txt".into());
        manifest.write(dir)?;
    }
    if failed > 0 {
        return Err(CliError::Verification {
            failed,
            total: checks.len(),
        });
    }
    Ok(())
}
