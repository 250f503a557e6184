use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::buckets::check_pairs;
use crate::error::Result;
use crate::market::ForecastOutcomePair;
use crate::oracle::OracleContext;
use crate::summation::CompensatedSum;

/// Backward-looking aggregate: all pairs that realised outcome `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeGroupReport {
    pub outcome: u64,
    pub count: u64,
    pub mean_prediction: f64,
    /// Standard error of the mean prediction; zero for single-pair groups.
    pub prediction_stderr: f64,
    /// Exact `E(r | s)` for the configured prior and process, when requested.
    pub analytic_hindsight_mean: Option<f64>,
}

#[derive(Default)]
struct Group {
    count: u64,
    sum: CompensatedSum,
    squared_dev: CompensatedSum,
}

/// Mean prediction per distinct observed outcome, ascending in the outcome.
pub fn backward_groups(
    pairs: &[ForecastOutcomePair],
    oracle: Option<&OracleContext>,
) -> Result<Vec<OutcomeGroupReport>> {
    check_pairs(pairs)?;
    let mut groups: BTreeMap<u64, Group> = BTreeMap::new();
    for p in pairs {
        let g = groups.entry(p.outcome).or_default();
        g.count += 1;
        g.sum.add(p.prediction);
    }
    let means: BTreeMap<u64, f64> = groups
        .iter()
        .map(|(&s, g)| (s, g.sum.value() / g.count as f64))
        .collect();
    for p in pairs {
        let d = p.prediction - means[&p.outcome];
        groups
            .get_mut(&p.outcome)
            .expect("group exists")
            .squared_dev
            .add(d * d);
    }

    groups
        .into_iter()
        .map(|(outcome, g)| {
            let n = g.count as f64;
            let prediction_stderr = if g.count > 1 {
                (g.squared_dev.value() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            let analytic_hindsight_mean =
                oracle.map(|ctx| ctx.hindsight_mean(outcome)).transpose()?;
            Ok(OutcomeGroupReport {
                outcome,
                count: g.count,
                mean_prediction: means[&outcome],
                prediction_stderr,
                analytic_hindsight_mean,
            })
        })
        .collect()
}

/// Count-weighted mean of `|r̄^(s) − s|` over the groups whose outcome lies in
/// the top `upper_fraction` of observed outcomes.
///
/// The cut is the outcome at rank `⌊(1 − upper_fraction)·n⌋` of the sorted
/// outcomes; every group at or above it is included.
pub fn backward_tail_gap(groups: &[OutcomeGroupReport], upper_fraction: f64) -> Option<f64> {
    let n: u64 = groups.iter().map(|g| g.count).sum();
    if n == 0 || !(upper_fraction > 0.0 && upper_fraction <= 1.0) {
        return None;
    }
    let rank = (((1.0 - upper_fraction) * n as f64).floor() as u64).min(n - 1);
    let mut seen = 0;
    let mut threshold = groups.last()?.outcome;
    for g in groups {
        seen += g.count;
        if seen > rank {
            threshold = g.outcome;
            break;
        }
    }
    let mut weight = 0u64;
    let mut acc = CompensatedSum::new();
    for g in groups.iter().filter(|g| g.outcome >= threshold) {
        weight += g.count;
        acc.add(g.count as f64 * (g.mean_prediction - g.outcome as f64).abs());
    }
    Some(acc.value() / weight as f64)
}
