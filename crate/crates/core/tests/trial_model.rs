use seqnorm_core::normal::cdf;
use seqnorm_core::{
    empirical_ks, simulate_batch, simulate_batch_with, PsiSpec, Sampling, TrialConfig,
};

fn within_binomial(freq: f64, p: f64, reps: usize) -> bool {
    (freq - p).abs() <= 3.0 * (p * (1.0 - p) / reps as f64).sqrt()
}

#[test]
fn first_look_two_sided_crossing() {
    let reps = 100_000;
    for n in [1, 7, 40] {
        let c = TrialConfig::new(0.0, 1.0, 0.5, vec![1, 2, 3], n, PsiSpec::two_sided(1.0));
        let freq = simulate_batch(&c, reps, 11).unwrap().stop_frequencies();
        let exact = 2.0 * (1.0 - cdf(1.0));
        assert!(
            within_binomial(freq[0], exact, reps),
            "n={n}: {} vs {exact}",
            freq[0]
        );
    }
}

#[test]
fn constant_rule_gives_truncated_geometric_stops() {
    let reps = 100_000;
    for p in [0.2, 0.5, 0.9] {
        let c = TrialConfig::new(0.3, 1.5, 0.75, vec![1, 2, 4, 5], 3, PsiSpec::constant(p));
        let freq = simulate_batch(&c, reps, 12).unwrap().stop_frequencies();
        assert_eq!(freq.iter().sum::<f64>(), 1.0);
        for (i, f) in freq.iter().enumerate() {
            let expected = if i < 3 {
                p * (1.0 - p).powi(i as i32)
            } else {
                (1.0 - p).powi(3)
            };
            assert!(
                within_binomial(*f, expected, reps),
                "p={p} look {}: {f} vs {expected}",
                i + 1
            );
        }
    }
}

#[test]
fn never_stopping_gives_standard_normal_z() {
    let c = TrialConfig::new(-1.0, 3.0, 0.0, vec![1, 2, 3], 20, PsiSpec::constant(0.0));
    let s = simulate_batch(&c, 100_000, 1).unwrap();
    assert!(s
        .results
        .iter()
        .all(|r| r.stop_index == 3 && r.sample_size == 60));
    // 10⁻³ critical value of the one-sample Kolmogorov statistic is 1.95/√m
    let ks = empirical_ks(&s.z_values()).unwrap();
    assert!(ks < 1.95 / (1e5f64).sqrt(), "{ks}");
}

#[test]
fn always_stopping_stops_at_first_look() {
    let c = TrialConfig::new(0.0, 1.0, 0.5, vec![2, 3], 5, PsiSpec::constant(1.0));
    let s = simulate_batch(&c, 10, 3).unwrap();
    assert!(s
        .results
        .iter()
        .all(|r| r.stop_index == 1 && r.sample_size == 10));
}

#[test]
fn result_fields_are_consistent() {
    for sampling in [Sampling::Observations, Sampling::BlockSums] {
        let c = TrialConfig::new(2.5, 0.7, 0.25, vec![1, 3, 4], 13, PsiSpec::two_sided(1.2));
        let s = simulate_batch_with(&c, 5_000, 4, sampling).unwrap();
        assert_eq!(s.results.len(), 5_000);
        for r in &s.results {
            assert_eq!(r.sample_size, c.looks[r.stop_index - 1] * c.n);
            let n = r.sample_size as f64;
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
            assert!(rel(r.mean * n, r.sum));
            assert!(rel(r.z, n.sqrt() * (r.mean - c.mu) / c.sigma));
        }
    }
}

#[test]
fn shifting_the_null_mean_with_the_data_keeps_z() {
    let rule = PsiSpec::one_sided(0.5);
    let centred = TrialConfig::new(0.0, 1.3, 0.5, vec![1, 2, 3], 9, rule);
    let shifted = TrialConfig::new(4.25, 1.3, 0.5, vec![1, 2, 3], 9, rule).with_null_mean(4.25);
    let a = simulate_batch(&centred, 20_000, 21).unwrap();
    let b = simulate_batch(&shifted, 20_000, 21).unwrap();
    assert_eq!(a.z_values(), b.z_values());
    let stops =
        |s: &seqnorm_core::SampleSet| s.results.iter().map(|r| r.stop_index).collect::<Vec<_>>();
    assert_eq!(stops(&a), stops(&b));
}

#[test]
fn block_sums_match_observations_in_law() {
    let c = TrialConfig::new(0.0, 1.0, 0.5, vec![1, 2], 25, PsiSpec::two_sided(1.0));
    let obs = simulate_batch_with(&c, 50_000, 5, Sampling::Observations)
        .unwrap()
        .stop_frequencies();
    let blk = simulate_batch_with(&c, 50_000, 6, Sampling::BlockSums)
        .unwrap()
        .stop_frequencies();
    let se = (2.0 * 0.3173 * 0.6827 / 50_000.0f64).sqrt();
    assert!((obs[0] - blk[0]).abs() <= 3.0 * se);
}
