//! Latency aggregation: mean, sample standard deviation, Student-t 95%
//! confidence interval, lower median, and nearest-rank p95.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("cannot aggregate an empty sample")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 for n = 1.
    pub std: f64,
    /// mean +/- t(0.975, n-1) * std / sqrt(n); collapses to (mean, mean)
    /// for n = 1.
    pub ci95: (f64, f64),
    /// Lower-of-two median for even n; always a member of the sample.
    pub median: f64,
    /// Nearest-rank: the sample at rank ceil(0.95 * n).
    pub p95: f64,
}

/// Two-tailed 95% Student-t critical values, df 1..=30 then selected larger
/// dfs; a df between entries takes the next lower entry (a slightly wider,
/// conservative interval).
const T_TABLE: [(usize, f64); 35] = [
    (1, 12.706),
    (2, 4.303),
    (3, 3.182),
    (4, 2.776),
    (5, 2.571),
    (6, 2.447),
    (7, 2.365),
    (8, 2.306),
    (9, 2.262),
    (10, 2.228),
    (11, 2.201),
    (12, 2.179),
    (13, 2.160),
    (14, 2.145),
    (15, 2.131),
    (16, 2.120),
    (17, 2.110),
    (18, 2.101),
    (19, 2.093),
    (20, 2.086),
    (21, 2.080),
    (22, 2.074),
    (23, 2.069),
    (24, 2.064),
    (25, 2.060),
    (26, 2.056),
    (27, 2.052),
    (28, 2.048),
    (29, 2.045),
    (30, 2.042),
    (40, 2.021),
    (60, 2.000),
    (80, 1.990),
    (100, 1.984),
    (120, 1.980),
];

pub fn t_critical(df: usize) -> f64 {
    debug_assert!(df >= 1);
    let mut best = T_TABLE[0].1;
    for (table_df, value) in T_TABLE {
        if table_df <= df {
            best = value;
        } else {
            break;
        }
    }
    best
}

pub fn aggregate(samples: &[f64]) -> Result<Stats, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = if n >= 2 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
    let median = sorted[(n - 1) / 2];
    let p95_rank = ((0.95 * n as f64).ceil() as usize).max(1);
    let p95 = sorted[p95_rank - 1];

    let ci95 = if n >= 2 {
        let half_width = t_critical(n - 1) * std / (n as f64).sqrt();
        (mean - half_width, mean + half_width)
    } else {
        (mean, mean)
    };

    Ok(Stats { n, mean, std, ci95, median, p95 })
}

pub fn median(samples: &[f64]) -> Option<f64> {
    aggregate(samples).ok().map(|s| s.median)
}
