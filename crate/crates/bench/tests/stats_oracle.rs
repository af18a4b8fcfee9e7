//! Cross-checks `aggregate` against an independent statistics oracle:
//! statrs supplies the exact Student-t quantiles the embedded table was
//! transcribed from, and the sample statistics are recomputed with
//! different arithmetic.

use otbridge_bench::stats::{aggregate, t_critical};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Independent reference for mean / std / median / p95. Computation order
/// deliberately differs from the implementation.
fn reference(samples: &[f64]) -> (f64, f64, f64, f64, (f64, f64)) {
    let n = samples.len() as f64;
    let mean = samples.iter().fold(0.0, |acc, x| acc + x / n);
    let variance = if samples.len() >= 2 {
        samples.iter().map(|x| (x - mean) * (x - mean)).fold(0.0, |a, b| a + b) / (n - 1.0)
    } else {
        0.0
    };
    let std = variance.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[(samples.len() - 1) / 2];
    let p95 = sorted[((0.95 * n).ceil() as usize).max(1) - 1];
    let ci = if samples.len() >= 2 {
        let half = t_critical(samples.len() - 1) * std / n.sqrt();
        (mean - half, mean + half)
    } else {
        (mean, mean)
    };
    (mean, std, median, p95, ci)
}

#[test]
fn embedded_t_table_matches_the_exact_quantiles_to_table_precision() {
    // the table carries 4-5 significant digits; each entry must round-trip
    // against the exact inverse CDF within half an ulp of the last printed
    // digit
    for df in (1..=30).chain([40, 60, 80, 100, 120]) {
        let dist = StudentsT::new(0.0, 1.0, df as f64).unwrap();
        let exact = dist.inverse_cdf(0.975);
        let table = t_critical(df);
        assert!(
            (table - exact).abs() <= 5.5e-4,
            "df {df}: table {table} vs exact {exact}"
        );
    }
}

#[test]
fn aggregate_matches_the_reference_oracle_on_random_samples() {
    // deterministic LCG over 100 random samples of plan-relevant sizes
    let mut state = 0x9E3779B97F4A7C15u64;
    let mut next_f64 = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / ((1u64 << 53) as f64) * 100.0
    };
    let sizes = [30usize, 10, 20, 5, 2, 1, 120];

    for trial in 0..100 {
        let n = sizes[trial % sizes.len()];
        let samples: Vec<f64> = (0..n).map(|_| next_f64()).collect();
        let stats = aggregate(&samples).unwrap();
        let (mean, std, median, p95, ci) = reference(&samples);

        let relative = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs()).max(1e-12);
            (a - b).abs() / scale
        };
        assert!(relative(stats.mean, mean) < 1e-9, "trial {trial} mean");
        assert!(relative(stats.std, std) < 1e-9, "trial {trial} std");
        assert_eq!(stats.median, median, "trial {trial} median");
        assert_eq!(stats.p95, p95, "trial {trial} p95");
        assert!(relative(stats.ci95.0, ci.0) < 1e-9, "trial {trial} ci lo");
        assert!(relative(stats.ci95.1, ci.1) < 1e-9, "trial {trial} ci hi");
    }
}
