//! Empirical evaluation of forecast/outcome pairs.
//!
//! Forward-looking: bucket pairs by prediction and compare each bucket's mean
//! outcome with its mean prediction. Backward-looking: group pairs by realised
//! outcome and report the mean prediction per outcome. Only the former is a
//! calibration check; the latter is kept for comparison with the analytic
//! hindsight mean.

mod bias;
mod buckets;
mod groups;
mod verdict;

pub use bias::{
    bootstrap_bias_test, global_bias_test, global_means, BiasTestResult, BootstrapBiasResult,
    DEFAULT_BOOTSTRAP_RESAMPLES, GLOBAL_Z_THRESHOLD,
};
pub use buckets::{
    forward_buckets, make_buckets, BucketLayout, BucketReport, BucketScheme, BucketSpec, Interval,
    DEFAULT_MIN_COUNT,
};
pub use groups::{backward_groups, backward_tail_gap, OutcomeGroupReport};
pub use verdict::{calibration_verdict, CalibrationVerdict, DEFAULT_Z_CRIT};
