//! Robust per-metric aggregates over trials.

use serde::Serialize;
use statrs::statistics::{Data, OrderStatistics, Statistics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Standard error of the mean; zero for a single sample.
    pub stderr: f64,
    pub n: usize,
}

impl SummaryStats {
    /// `None` for an empty sample.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len();
        let mean = samples.iter().mean();
        let stderr = if n > 1 {
            samples.iter().std_dev() / (n as f64).sqrt()
        } else {
            0.0
        };
        let mut data = Data::new(samples.to_vec());
        let median = data.median();
        let q1 = data.lower_quartile();
        let q3 = data.upper_quartile();
        Some(Self {
            mean,
            median,
            q1,
            q3,
            iqr: q3 - q1,
            stderr,
            n,
        })
    }
}

/// Binomial standard error of a proportion `p` estimated from `n` trials.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}
