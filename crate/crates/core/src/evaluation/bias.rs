use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buckets::check_pairs;
use crate::error::Result;
use crate::market::ForecastOutcomePair;
use crate::rng::{derive_seed, domain, RandomStream};
use crate::summation::{compensated_sum, mean_and_variance};

/// |z| above this marks a global discrepancy as significant.
pub const GLOBAL_Z_THRESHOLD: f64 = 3.0;

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

/// Overall mean prediction and mean outcome.
pub fn global_means(pairs: &[ForecastOutcomePair]) -> Result<(f64, f64)> {
    check_pairs(pairs)?;
    let n = pairs.len() as f64;
    let r = compensated_sum(pairs.iter().map(|p| p.prediction)) / n;
    let s = compensated_sum(pairs.iter().map(|p| p.outcome as f64)) / n;
    Ok((r, s))
}

/// Paired test of `mean outcome − mean prediction` against zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasTestResult {
    pub n: u64,
    pub mean_prediction: f64,
    pub mean_outcome: f64,
    /// `mean_outcome − mean_prediction`.
    pub difference: f64,
    /// `√(Var̂(s − r) / n)`; `None` when `n = 1`.
    pub stderr: Option<f64>,
    pub z_score: Option<f64>,
    pub significant_at_3sigma: bool,
    /// No usable standard error (single pair, or zero variance of the differences).
    pub degenerate: bool,
}

pub fn global_bias_test(pairs: &[ForecastOutcomePair]) -> Result<BiasTestResult> {
    let (mean_prediction, mean_outcome) = global_means(pairs)?;
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|p| p.outcome as f64 - p.prediction)
        .collect();
    let (_, variance) = mean_and_variance(&diffs).expect("pairs are nonempty");
    let difference = mean_outcome - mean_prediction;
    let stderr = variance.map(|v| (v / pairs.len() as f64).sqrt());
    let z_score = stderr.filter(|&se| se > 0.0).map(|se| difference / se);
    Ok(BiasTestResult {
        n: pairs.len() as u64,
        mean_prediction,
        mean_outcome,
        difference,
        stderr,
        z_score,
        significant_at_3sigma: z_score.is_some_and(|z| z.abs() > GLOBAL_Z_THRESHOLD),
        degenerate: z_score.is_none(),
    })
}

/// Bootstrap alternative to [`global_bias_test`] for small samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapBiasResult {
    pub difference: f64,
    /// Standard deviation of the resampled mean differences.
    pub stderr: f64,
    /// 2.5% and 97.5% percentiles of the resampled mean differences.
    pub ci95: (f64, f64),
    pub z_score: Option<f64>,
    pub significant_at_3sigma: bool,
    pub resamples: usize,
}

/// Resamples paired differences with replacement.
pub fn bootstrap_bias_test(
    pairs: &[ForecastOutcomePair],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapBiasResult> {
    check_pairs(pairs)?;
    let resamples = resamples.max(2);
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|p| p.outcome as f64 - p.prediction)
        .collect();
    let n = diffs.len();
    let (mean_prediction, mean_outcome) = global_means(pairs)?;
    let difference = mean_outcome - mean_prediction;
    let mut rng = RandomStream::new(derive_seed(seed, domain::BOOTSTRAP), 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| compensated_sum((0..n).map(|_| diffs[rng.random_range(0..n)])) / n as f64)
        .collect();
    let (_, var) = mean_and_variance(&means).expect("at least two resamples");
    let stderr = var.unwrap_or(0.0).sqrt();
    means.sort_by(f64::total_cmp);
    let pct = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let z_score = (stderr > 0.0).then(|| difference / stderr);
    Ok(BootstrapBiasResult {
        difference,
        stderr,
        ci95: (pct(0.025), pct(0.975)),
        z_score,
        significant_at_3sigma: z_score.is_some_and(|z| z.abs() > GLOBAL_Z_THRESHOLD),
        resamples,
    })
}
