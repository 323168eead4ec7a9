//! Acceptance criteria, one line each. A criterion reported UNATTAINABLE
//! failed only on cells whose exact value, computed by quadrature from the
//! identity, already violates it; any other failure is FAIL and makes the
//! target exit nonzero.

use std::fs;
use std::process::{Command, ExitCode};

use seqnorm_core::experiments::{
    compare_large_distances, ks_difference_se, StudyGrid, TheoremCase, LARGE_DISTANCES,
};
use seqnorm_core::fundamental::{example2_ks, ks_by_identity, rhs_transform};
use seqnorm_core::metrics::ks_standard_error;
use seqnorm_core::seed::{derive_seed, stream_rng};
use seqnorm_core::transform::{normal_transform_direct, normal_transform_recursive, BoundedMap};
use seqnorm_core::verification::{
    example1_config, example2_config, identity_checks, identity_suite, EXAMPLE1_SIZES,
    EXAMPLE2_SIZES, EXAMPLE_KS_TOLERANCE,
};
use seqnorm_core::{
    empirical_ks, run_study, simulate_batch, PsiSpec, QuadratureSpec, RhsRoute, Side, StudyRow,
    TestFunction, TrialConfig,
};

const REPS: usize = 100_000;
const EXAMPLE_SEED: u64 = 1;
const IDENTITY_SEED: u64 = 9;
const STUDY_SEED: u64 = 1;
const COVERAGE_BAND: f64 = 0.02;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Unattainable,
    Fail,
}

struct Outcome {
    number: usize,
    title: &'static str,
    status: Status,
    detail: String,
}

fn report(o: &Outcome) {
    let s = match o.status {
        Status::Pass => "PASS",
        Status::Unattainable => "UNATTAINABLE",
        Status::Fail => "FAIL",
    };
    println!("criterion {} ({}): {s} | {}", o.number, o.title, o.detail);
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn criterion1() -> Outcome {
    let exact = example2_ks();
    let mut pass = exact == 0.125;
    let mut parts = vec![format!("example2_ks() = {exact}")];
    for (k, &n) in EXAMPLE2_SIZES.iter().enumerate() {
        let z = simulate_batch(
            &example2_config(n),
            REPS,
            derive_seed(EXAMPLE_SEED, k as u64),
        )
        .unwrap()
        .z_values();
        let ks = empirical_ks(&z).unwrap();
        pass &= (ks - 0.125).abs() <= EXAMPLE_KS_TOLERANCE;
        parts.push(format!("n={n}: {ks:.4}"));
    }
    Outcome {
        number: 1,
        title: "example 2 exact 1/8",
        status: status(pass),
        detail: parts.join(", "),
    }
}

fn criterion2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in [1.0, 2.0] {
        let bound = seqnorm_core::fundamental::example1_lower_bound(c);
        let mut line = format!("C={c} bound {bound:.4}:");
        for (k, &n) in EXAMPLE1_SIZES.iter().enumerate() {
            let seed = derive_seed(EXAMPLE_SEED, 10 + 10 * c as u64 + k as u64);
            let ks = empirical_ks(
                &simulate_batch(&example1_config(c, n), REPS, seed)
                    .unwrap()
                    .z_values(),
            )
            .unwrap();
            pass &= ks >= bound - EXAMPLE_KS_TOLERANCE;
            line.push_str(&format!(" n={n} {ks:.4}"));
        }
        parts.push(line);
    }
    Outcome {
        number: 2,
        title: "example 1 persistence",
        status: status(pass),
        detail: parts.join("; "),
    }
}

fn identity_criterion(number: usize, title: &'static str, route: RhsRoute) -> Outcome {
    let cases = identity_suite(route, IDENTITY_SEED, REPS, &QuadratureSpec::default()).unwrap();
    let checks = identity_checks(&cases);
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    let worst = cases
        .iter()
        .flat_map(|c| c.reports.iter())
        .map(|r| r.abs_diff / r.tolerance)
        .fold(0.0, f64::max);
    let mut detail = format!(
        "{} of {} checks within 3 SE + 1e-4 (largest |diff|/tolerance {worst:.2})",
        checks.len() - failed.len(),
        checks.len()
    );
    for f in &failed {
        detail.push_str(&format!("; failed {}: {}", f.name, f.detail));
    }
    Outcome {
        number,
        title,
        status: status(failed.is_empty()),
        detail,
    }
}

fn criterion5() -> Outcome {
    use rand::RngExt;
    let quad = QuadratureSpec {
        nodes: 64,
        inner_nodes: 256,
        mc_samples: 1,
    };
    let mut rng = stream_rng(EXAMPLE_SEED, 5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        for i in 1..=3 {
            let maps: Vec<BoundedMap> = (0..i)
                .map(|_| {
                    let c = rng.random_range(0.2..2.5);
                    let base = match rng.random_range(0..4) {
                        0 => BoundedMap::complement_of(PsiSpec::two_sided(c)),
                        1 => BoundedMap::complement_of(PsiSpec::one_sided(c)),
                        2 => BoundedMap::Psi(PsiSpec::LeftIndicator),
                        _ => BoundedMap::Psi(PsiSpec::two_sided(c)),
                    };
                    base.affine(rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0))
                })
                .collect();
            let parts: Vec<f64> = (0..=i).map(|_| rng.random_range(0.5..3.0)).collect();
            let mu = rng.random_range(-1.0..1.0);
            let sigma = rng.random_range(0.5..2.0);
            let total: f64 = parts.iter().sum();
            let x = mu * total + rng.random_range(-2.0..2.0) * sigma * total.sqrt();
            let d = normal_transform_direct(&maps, mu, sigma, &parts, x, &quad).unwrap();
            let r = normal_transform_recursive(&maps, mu, sigma, &parts, x, &quad).unwrap();
            worst = worst.max((d - r).abs());
        }
    }
    let mut ones_err = 0.0f64;
    for i in 1..=3 {
        let maps = vec![BoundedMap::ones(); i];
        let parts = vec![1.0; i + 1];
        for x in [-1.5, 0.0, 2.0] {
            let d = normal_transform_direct(&maps, 0.3, 1.2, &parts, x, &quad).unwrap();
            let r = normal_transform_recursive(&maps, 0.3, 1.2, &parts, x, &quad).unwrap();
            ones_err = ones_err.max((d - 1.0).abs()).max((r - 1.0).abs());
        }
    }
    Outcome {
        number: 5,
        title: "normal transform routes agree",
        status: status(worst <= 1e-6 && ones_err <= 1e-9),
        detail: format!("max |direct - recursive| {worst:.2e} over 60 draws; all-ones max |value - 1| {ones_err:.2e}"),
    }
}

fn psi_of(row: &StudyRow) -> PsiSpec {
    let c = row.c.expect("threshold rule");
    if row.side == "one" {
        PsiSpec::one_sided(c)
    } else {
        PsiSpec::two_sided(c)
    }
}

fn config_of(row: &StudyRow) -> TrialConfig {
    TrialConfig::new(row.mu, 1.0, row.gamma, vec![1, 2, 3], row.n, psi_of(row))
}

fn cell_label(r: &StudyRow) -> String {
    format!(
        "(mu={}, n={}, C={}, gamma={}, {})",
        r.mu,
        r.n,
        r.c.unwrap_or(f64::NAN),
        r.gamma,
        r.side
    )
}

fn criterion6(rows: &[StudyRow]) -> Outcome {
    let report = compare_large_distances(rows, &LARGE_DISTANCES).unwrap();
    let worst = report
        .matches
        .iter()
        .map(|m| (m.row.ks - m.expected.ks).abs())
        .fold(0.0, f64::max);
    let mut detail = format!(
        "{} table cells, max |ks - printed| {worst:.4}; {} covered non-E2 cells at n=50 above 0.05",
        report.matches.len(),
        report.covered_violations.len()
    );
    let listed: Vec<String> = report
        .matches
        .iter()
        .filter(|m| m.row.gamma == 0.0 || m.expected.gamma.is_some())
        .map(|m| format!("{:.3}/{:.3}", m.row.ks, m.expected.ks))
        .collect();
    detail.push_str(&format!("; observed/printed {}", listed.join(" ")));
    for m in report.matches.iter().filter(|m| !m.within_tolerance) {
        detail.push_str(&format!(
            "; out of tolerance {} {:.4}",
            cell_label(&m.row),
            m.row.ks
        ));
    }
    for r in &report.covered_violations {
        detail.push_str(&format!("; covered cell {} ks {:.4}", cell_label(r), r.ks));
    }
    if !report.all_large() {
        detail.push_str("; note: some table cells are at or below 0.05");
    }
    Outcome {
        number: 6,
        title: "table of large distances at n=50",
        status: status(report.table_reproduced() && report.covered_close()),
        detail,
    }
}

fn criterion7(rows: &[StudyRow]) -> Outcome {
    let quad = QuadratureSpec::default();
    let h = TestFunction::IndicatorAbsLeq(1.96);
    let considered: Vec<&StudyRow> = rows.iter().filter(|r| r.n >= 50).collect();
    let outside: Vec<&StudyRow> = considered
        .iter()
        .copied()
        .filter(|r| (r.coverage - 0.95).abs() > COVERAGE_BAND)
        .collect();
    let mut explained = true;
    let mut parts = Vec::new();
    for r in &outside {
        let exact = h.standard_mean() + rhs_transform(&config_of(r), h, &quad, 0).unwrap().value;
        let se = (exact * (1.0 - exact) / r.replications as f64).sqrt();
        let agrees = (r.coverage - exact).abs() <= 3.0 * se;
        let violates = (exact - 0.95).abs() > COVERAGE_BAND;
        explained &= agrees && violates;
        parts.push(format!(
            "{} coverage {:.4}, exact {exact:.4}",
            cell_label(r),
            r.coverage
        ));
    }
    let lowest = considered.iter().map(|r| r.coverage).fold(1.0, f64::min);
    let status = if outside.is_empty() {
        Status::Pass
    } else if explained {
        Status::Unattainable
    } else {
        Status::Fail
    };
    let mut detail = format!(
        "{} of {} cells with n >= 50 within 0.95 ± {COVERAGE_BAND} (lowest {lowest:.4})",
        considered.len() - outside.len(),
        considered.len()
    );
    if !outside.is_empty() {
        detail.push_str(&format!("; outside: {}", parts.join("; ")));
    }
    Outcome {
        number: 7,
        title: "coverage of the naive interval",
        status,
        detail,
    }
}

fn criterion8(rows: &[StudyRow]) -> Outcome {
    let quad = QuadratureSpec::default();
    let at = |r: &StudyRow, n: u64| {
        rows.iter()
            .find(|o| {
                o.n == n && o.mu == r.mu && o.c == r.c && o.gamma == r.gamma && o.side == r.side
            })
            .expect("grid row")
    };
    let (mut covered, mut covered_bad, mut e2, mut degenerate) = (0, Vec::new(), 0, 0);
    let mut e2_bad = Vec::new();
    for r in rows.iter().filter(|r| r.n == 50) {
        let psi = psi_of(r);
        let case = seqnorm_core::experiments::classify_theorem_case(r.mu, r.gamma, psi);
        let big = at(r, 500);
        if case == TheoremCase::E2 {
            if psi.jumps().is_empty() {
                degenerate += 1;
                continue;
            }
            e2 += 1;
            if big.ks >= r.ks - seqnorm_core::experiments::E2_DECREASE {
                e2_bad.push((r, big));
            }
        } else if case.is_covered() {
            covered += 1;
            if big.ks > r.ks + 2.0 * ks_difference_se(r.replications, big.replications) {
                covered_bad.push((r, big));
            }
        }
    }
    let mut detail = format!(
        "{} of {covered} covered non-E2 designs with ks(500) <= ks(50) + 2 SE; {} of {e2} E2 designs with ks(500) < ks(50) - 0.02 ({degenerate} E2 designs with constant stopping map excluded)",
        covered - covered_bad.len(),
        e2 - e2_bad.len()
    );
    let mut explained = covered_bad.is_empty();
    for (small, big) in &covered_bad {
        detail.push_str(&format!(
            "; covered {} ks {:.4} -> {:.4}",
            cell_label(small),
            small.ks,
            big.ks
        ));
    }
    for (small, big) in &e2_bad {
        let exact50 = ks_by_identity(&config_of(small), &quad).unwrap();
        let exact500 = ks_by_identity(&config_of(big), &quad).unwrap();
        let tol = 3.0 * ks_standard_error(small.replications);
        let agrees = (small.ks - exact50).abs() <= tol && (big.ks - exact500).abs() <= tol;
        explained &= agrees && exact500 >= exact50 - seqnorm_core::experiments::E2_DECREASE;
        detail.push_str(&format!(
            "; E2 {} ks {:.4} -> {:.4}, exact {exact50:.4} -> {exact500:.4}",
            cell_label(small),
            small.ks,
            big.ks
        ));
    }
    let status = if covered_bad.is_empty() && e2_bad.is_empty() {
        Status::Pass
    } else if explained {
        Status::Unattainable
    } else {
        Status::Fail
    };
    Outcome {
        number: 8,
        title: "convergence direction",
        status,
        detail,
    }
}

fn criterion9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_seqnorm"))
            .args([
                "study",
                "--grid",
                "default",
                "--reps",
                "1000",
                "--seed",
                "5",
                "--no-histograms",
                "--threads",
                threads,
            ])
            .arg("--out-dir")
            .arg(&out)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        fs::read(out.join("study.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    let lines = String::from_utf8_lossy(&a).lines().count();
    Outcome {
        number: 9,
        title: "study determinism",
        status: status(a == b && a == c && lines == 433),
        detail: format!(
            "default grid, {lines} lines; rerun identical: {}; 1 vs 3 threads identical: {}",
            a == b,
            a == c
        ),
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![criterion1(), criterion2()];
    report(&outcomes[0]);
    report(&outcomes[1]);
    for (number, title, route) in [
        (3, "identity via normal transform", RhsRoute::Transform),
        (
            4,
            "identity via coefficient variables",
            RhsRoute::Coefficients,
        ),
    ] {
        outcomes.push(identity_criterion(number, title, route));
        report(outcomes.last().unwrap());
    }
    outcomes.push(criterion5());
    report(outcomes.last().unwrap());

    let grid = StudyGrid {
        replications: REPS,
        base_seed: STUDY_SEED,
        ..StudyGrid::default()
    };
    assert_eq!(grid.sides, vec![Side::One, Side::Two]);
    let rows = run_study(&grid).unwrap();
    for o in [
        criterion6(&rows),
        criterion7(&rows),
        criterion8(&rows),
        criterion9(),
    ] {
        report(&o);
        outcomes.push(o);
    }

    let failed = outcomes.iter().filter(|o| o.status == Status::Fail).count();
    let unattainable = outcomes
        .iter()
        .filter(|o| o.status == Status::Unattainable)
        .count();
    println!(
        "acceptance: {} passed, {unattainable} unattainable, {failed} failed",
        outcomes.len() - failed - unattainable
    );
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
