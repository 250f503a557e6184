use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::ForecastOutcomePair;
use crate::summation::CompensatedSum;

/// Buckets with fewer pairs than this are flagged and not tested.
pub const DEFAULT_MIN_COUNT: usize = 30;

const MAX_BUCKETS: usize = 1_000_000;

/// How prediction buckets are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BucketScheme {
    /// Edges at `origin + k·width`, plus an initial edge at zero.
    FixedWidth { width: f64, origin: f64 },
    /// Edges at empirical quantiles of the predictions.
    Quantile { buckets: usize },
    /// Edges at zero and `min_edge · ratio^k`.
    LogWidth { ratio: f64, min_edge: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketSpec {
    pub scheme: BucketScheme,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
}

fn default_min_count() -> usize {
    DEFAULT_MIN_COUNT
}

impl Default for BucketSpec {
    fn default() -> Self {
        BucketSpec {
            scheme: BucketScheme::FixedWidth {
                width: 1.0,
                origin: 0.0,
            },
            min_count: DEFAULT_MIN_COUNT,
        }
    }
}

impl BucketSpec {
    pub fn new(scheme: BucketScheme, min_count: usize) -> Result<Self> {
        let spec = BucketSpec { scheme, min_count };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_count == 0 {
            return Err(Error::InvalidParameter("min_count must be positive".into()));
        }
        let ok = match self.scheme {
            BucketScheme::FixedWidth { width, origin } => {
                width.is_finite() && width > 0.0 && origin.is_finite() && origin >= 0.0
            }
            BucketScheme::Quantile { buckets } => buckets >= 1,
            BucketScheme::LogWidth { ratio, min_edge } => {
                ratio.is_finite() && ratio > 1.0 && min_edge.is_finite() && min_edge > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid bucket scheme {:?}",
                self.scheme
            )))
        }
    }
}

/// Half-open prediction interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

/// Contiguous bucket layout starting at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BucketLayout {
    edges: Vec<f64>,
    /// Set when a quantile layout produced fewer buckets than requested.
    pub merged: bool,
}

impl BucketLayout {
    pub fn intervals(&self) -> Vec<Interval> {
        self.edges
            .windows(2)
            .map(|w| Interval { lo: w[0], hi: w[1] })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the bucket containing `x`, if inside the layout.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let idx = self.edges.partition_point(|&e| e <= x);
        (idx >= 1 && idx < self.edges.len()).then(|| idx - 1)
    }
}

pub(crate) fn check_pairs(pairs: &[ForecastOutcomePair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no forecast/outcome pairs"));
    }
    if let Some(p) = pairs
        .iter()
        .find(|p| !(p.prediction.is_finite() && p.prediction >= 0.0))
    {
        return Err(Error::Domain(format!(
            "item {}: prediction must be finite and nonnegative, got {}",
            p.item_id, p.prediction
        )));
    }
    Ok(())
}

/// Builds the bucket layout covering `[0, max prediction]`.
pub fn make_buckets(pairs: &[ForecastOutcomePair], spec: &BucketSpec) -> Result<BucketLayout> {
    spec.validate()?;
    check_pairs(pairs)?;
    let max = pairs.iter().map(|p| p.prediction).fold(0.0, f64::max);
    let mut edges = vec![0.0];
    let mut merged = false;

    let too_many =
        || Error::InvalidParameter(format!("bucket layout would exceed {MAX_BUCKETS} buckets"));

    match spec.scheme {
        BucketScheme::FixedWidth { width, origin } => {
            let start = origin - (origin / width).floor() * width;
            let mut k = if start > 0.0 { 0u64 } else { 1 };
            loop {
                let edge = start + k as f64 * width;
                if edge > *edges.last().unwrap() {
                    edges.push(edge);
                }
                if edge > max {
                    break;
                }
                if edges.len() > MAX_BUCKETS {
                    return Err(too_many());
                }
                k += 1;
            }
        }
        BucketScheme::Quantile { buckets } => {
            let mut sorted: Vec<f64> = pairs.iter().map(|p| p.prediction).collect();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let min = sorted[0];
            for i in 1..buckets {
                let edge = sorted[(i * n / buckets).min(n - 1)];
                if edge > min && edge > *edges.last().unwrap() {
                    edges.push(edge);
                }
            }
            edges.push(max.next_up());
            merged = edges.len() - 1 < buckets;
        }
        BucketScheme::LogWidth { ratio, min_edge } => {
            let mut k = 0i32;
            loop {
                let edge = min_edge * ratio.powi(k);
                edges.push(edge);
                if edge > max {
                    break;
                }
                if edges.len() > MAX_BUCKETS {
                    return Err(too_many());
                }
                k += 1;
            }
        }
    }
    Ok(BucketLayout { edges, merged })
}

/// Forward-looking aggregate over one prediction bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    /// `None` for empty buckets.
    pub mean_prediction: Option<f64>,
    pub mean_outcome: Option<f64>,
    /// Standard error of the mean outcome.
    pub outcome_stderr: f64,
    /// `(mean_outcome − mean_prediction) / stderr`; suppressed for flagged or zero-variance buckets.
    pub z_score: Option<f64>,
    pub flagged_low_count: bool,
}

#[derive(Clone, Default)]
struct Accumulator {
    count: u64,
    prediction: CompensatedSum,
    outcome: CompensatedSum,
    squared_dev: CompensatedSum,
}

/// Mean outcome per prediction bucket, compared with the mean prediction.
pub fn forward_buckets(
    pairs: &[ForecastOutcomePair],
    spec: &BucketSpec,
) -> Result<Vec<BucketReport>> {
    let layout = make_buckets(pairs, spec)?;
    let mut acc = vec![Accumulator::default(); layout.len()];
    let mut slots = Vec::with_capacity(pairs.len());
    for p in pairs {
        let b = layout
            .locate(p.prediction)
            .expect("layout covers every prediction");
        slots.push(b);
        let a = &mut acc[b];
        a.count += 1;
        a.prediction.add(p.prediction);
        a.outcome.add(p.outcome as f64);
    }
    let means: Vec<f64> = acc
        .iter()
        .map(|a| a.outcome.value() / a.count.max(1) as f64)
        .collect();
    for (p, &b) in pairs.iter().zip(&slots) {
        let d = p.outcome as f64 - means[b];
        acc[b].squared_dev.add(d * d);
    }

    Ok(layout
        .intervals()
        .into_iter()
        .zip(acc)
        .map(|(iv, a)| {
            let n = a.count as f64;
            let (mean_prediction, mean_outcome) = if a.count > 0 {
                (Some(a.prediction.value() / n), Some(a.outcome.value() / n))
            } else {
                (None, None)
            };
            let outcome_stderr = if a.count > 1 {
                (a.squared_dev.value() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            let flagged_low_count = (a.count as usize) < spec.min_count;
            let z_score = match (mean_prediction, mean_outcome) {
                (Some(mp), Some(mo)) if !flagged_low_count && outcome_stderr > 0.0 => {
                    Some((mo - mp) / outcome_stderr)
                }
                _ => None,
            };
            BucketReport {
                lo: iv.lo,
                hi: iv.hi,
                count: a.count,
                mean_prediction,
                mean_outcome,
                outcome_stderr,
                z_score,
                flagged_low_count,
            }
        })
        .collect())
}
