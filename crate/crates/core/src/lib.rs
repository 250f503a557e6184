//! Simulation and evaluation of retail-demand rate forecasts.
//!
//! Items sell according to a Poisson (or gamma-blurred, negative-binomial)
//! process around a forecast rate. The crate simulates assortments and sales,
//! distorts forecasts on purpose, and evaluates forecast/outcome pairs two
//! ways: bucketed by prediction (forward-looking) and grouped by outcome
//! (backward-looking). The [`oracle`] module provides the exact expectations
//! for both views, which shows that grouping by outcome makes even a perfectly
//! calibrated forecast look biased.

pub mod distributions;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod market;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod summation;

pub use distributions::{DemandProcess, RatePrior};
pub use error::{Error, Result, Stage};
pub use evaluation::{
    backward_groups, calibration_verdict, forward_buckets, global_bias_test, global_means,
    make_buckets, BiasTestResult, BucketReport, BucketScheme, BucketSpec, CalibrationVerdict,
    OutcomeGroupReport,
};
pub use experiment::{run_experiment, write_report, ExperimentConfig, ExperimentReport};
pub use market::{
    apply_distortion, build_pairs, generate_assortment, realize_sales, Assortment,
    DistortionStrategy, ForecastOutcomePair,
};
pub use oracle::{OracleContext, QuadratureScheme, QuadratureSpec};
pub use rng::RandomStream;
