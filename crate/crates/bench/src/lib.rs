//! Shared fixtures for the criterion benches.

use hindsight::{
    apply_distortion, build_pairs, generate_assortment, realize_sales, DemandProcess,
    DistortionStrategy, ForecastOutcomePair, RatePrior,
};

/// Honest Gamma(1, 0.5) + Poisson pairs.
pub fn calibrated_pairs(n: usize, seed: u64) -> Vec<ForecastOutcomePair> {
    let prior = RatePrior::gamma(1.0, 0.5).expect("valid prior");
    let assortment = generate_assortment(&prior, n, seed).expect("n > 0");
    let outcomes = realize_sales(&DemandProcess::Poisson, &assortment, seed).expect("valid rates");
    let predictions = apply_distortion(&assortment, &DistortionStrategy::Honest);
    build_pairs(&predictions, &outcomes).expect("equal lengths")
}
