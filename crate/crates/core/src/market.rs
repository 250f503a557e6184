//! Synthetic assortments, one day of realised sales, and forecast distortions.
//!
//! Every item draws from its own random stream keyed by `(seed, item_id)`, so
//! results do not depend on iteration order or on the number of threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DemandProcess, RatePrior};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, domain, RandomStream};
use crate::summation::compensated_sum;

/// Default floor applied by [`DistortionStrategy::Exaggerate`].
pub const DEFAULT_EXAGGERATION_FLOOR: f64 = 1e-9;

/// The true selling rates of an assortment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assortment {
    true_rates: Vec<f64>,
}

impl Assortment {
    pub fn new(true_rates: Vec<f64>) -> Result<Self> {
        if let Some(r) = true_rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Domain(format!(
                "assortment rates must be finite and nonnegative, got {r}"
            )));
        }
        Ok(Assortment { true_rates })
    }

    pub fn item_count(&self) -> usize {
        self.true_rates.len()
    }

    pub fn true_rates(&self) -> &[f64] {
        &self.true_rates
    }

    pub fn mean_rate(&self) -> f64 {
        if self.true_rates.is_empty() {
            return 0.0;
        }
        compensated_sum(self.true_rates.iter().copied()) / self.true_rates.len() as f64
    }
}

/// One item's forecast rate and realised sales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutcomePair {
    pub item_id: u64,
    pub prediction: f64,
    pub outcome: u64,
}

/// How the forecast handed to the evaluator relates to the true rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StrategySpec", into = "StrategySpec")]
pub enum DistortionStrategy {
    /// The true rates.
    Honest,
    /// True rates reassigned across items by a seeded permutation.
    Permutation { seed: u64 },
    /// Every item gets the assortment mean.
    ConstantMean,
    /// `r ↦ max(floor, r̄ + gamma·(r − r̄))`.
    Exaggerate { gamma: f64, floor: f64 },
}

// Serde ignores stray keys next to the tag of a unit variant, so the wire
// form uses empty struct variants to keep unknown keys an error.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StrategySpec {
    Honest {},
    Permutation {
        seed: u64,
    },
    ConstantMean {},
    Exaggerate {
        gamma: f64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
}

fn default_floor() -> f64 {
    DEFAULT_EXAGGERATION_FLOOR
}

impl TryFrom<StrategySpec> for DistortionStrategy {
    type Error = Error;

    fn try_from(spec: StrategySpec) -> Result<Self> {
        let s = match spec {
            StrategySpec::Honest {} => DistortionStrategy::Honest,
            StrategySpec::Permutation { seed } => DistortionStrategy::Permutation { seed },
            StrategySpec::ConstantMean {} => DistortionStrategy::ConstantMean,
            StrategySpec::Exaggerate { gamma, floor } => {
                DistortionStrategy::Exaggerate { gamma, floor }
            }
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<DistortionStrategy> for StrategySpec {
    fn from(s: DistortionStrategy) -> Self {
        match s {
            DistortionStrategy::Honest => StrategySpec::Honest {},
            DistortionStrategy::Permutation { seed } => StrategySpec::Permutation { seed },
            DistortionStrategy::ConstantMean => StrategySpec::ConstantMean {},
            DistortionStrategy::Exaggerate { gamma, floor } => {
                StrategySpec::Exaggerate { gamma, floor }
            }
        }
    }
}

impl DistortionStrategy {
    pub fn exaggerate(gamma: f64, floor: f64) -> Result<Self> {
        let s = DistortionStrategy::Exaggerate { gamma, floor };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistortionStrategy::Exaggerate { gamma, floor } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exaggeration factor must be positive, got {gamma}"
                    )));
                }
                if !(floor.is_finite() && *floor > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exaggeration floor must be positive, got {floor}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Draws `n` independent true rates from `prior`.
pub fn generate_assortment(prior: &RatePrior, n: usize, seed: u64) -> Result<Assortment> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "assortment needs at least one item".into(),
        ));
    }
    let key = derive_seed(seed, domain::ASSORTMENT);
    let true_rates = (0..n as u64)
        .into_par_iter()
        .map(|j| prior.sample(&mut RandomStream::new(key, j)))
        .collect();
    Ok(Assortment { true_rates })
}

/// Sales of a single item; depends only on `(seed, item_id, rate)`.
pub fn realize_sale(process: &DemandProcess, item_id: u64, rate: f64, seed: u64) -> Result<u64> {
    let key = derive_seed(seed, domain::SALES);
    process.sample(rate, &mut RandomStream::new(key, item_id))
}

/// One day of sales for every item, indexed by item position.
pub fn realize_sales(
    process: &DemandProcess,
    assortment: &Assortment,
    seed: u64,
) -> Result<Vec<u64>> {
    process.validate()?;
    assortment
        .true_rates
        .par_iter()
        .enumerate()
        .map(|(j, &r)| realize_sale(process, j as u64, r, seed))
        .collect()
}

/// Forecast rates presented to the evaluator under `strategy`.
pub fn apply_distortion(assortment: &Assortment, strategy: &DistortionStrategy) -> Vec<f64> {
    let rates = &assortment.true_rates;
    match *strategy {
        DistortionStrategy::Honest => rates.clone(),
        DistortionStrategy::Permutation { seed } => {
            let perm = permutation(rates.len(), seed);
            perm.iter().map(|&i| rates[i]).collect()
        }
        DistortionStrategy::ConstantMean => vec![assortment.mean_rate(); rates.len()],
        DistortionStrategy::Exaggerate { gamma, floor } => {
            let mean = assortment.mean_rate();
            rates
                .iter()
                .map(|&r| (mean + gamma * (r - mean)).max(floor))
                .collect()
        }
    }
}

/// Seeded Fisher–Yates permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = RandomStream::new(derive_seed(seed, domain::PERMUTATION), 0);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Zips predictions and outcomes into pairs with item ids `0..n`.
pub fn build_pairs(predictions: &[f64], outcomes: &[u64]) -> Result<Vec<ForecastOutcomePair>> {
    if predictions.len() != outcomes.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: outcomes.len(),
        });
    }
    Ok(predictions
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(j, (&prediction, &outcome))| ForecastOutcomePair {
            item_id: j as u64,
            prediction,
            outcome,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assortment(rates: &[f64]) -> Assortment {
        Assortment::new(rates.to_vec()).unwrap()
    }

    #[test]
    fn degenerate_prior_gives_constant_rates() {
        let prior = RatePrior::uniform(2.0, 2.0 + 1e-12).unwrap();
        let a = generate_assortment(&prior, 3, 1).unwrap();
        assert_eq!(a.item_count(), 3);
        for &r in a.true_rates() {
            assert!((r - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_assortment_rejected() {
        let prior = RatePrior::gamma(1.0, 1.0).unwrap();
        assert!(matches!(
            generate_assortment(&prior, 0, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn assortment_mean_rate() {
        let prior = RatePrior::gamma(1.0, 0.5).unwrap();
        let a = generate_assortment(&prior, 10_000, 2024).unwrap();
        // sd of Exp(0.5) is 2.
        assert!(
            (a.mean_rate() - 2.0).abs() < 4.0 * 2.0 / 100.0,
            "{}",
            a.mean_rate()
        );
    }

    #[test]
    fn generation_and_sales_are_deterministic() {
        let prior = RatePrior::gamma(1.0, 0.5).unwrap();
        let a = generate_assortment(&prior, 500, 77).unwrap();
        let b = generate_assortment(&prior, 500, 77).unwrap();
        assert_eq!(a, b);
        let sa = realize_sales(&DemandProcess::Poisson, &a, 5).unwrap();
        let sb = realize_sales(&DemandProcess::Poisson, &b, 5).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn parallel_sales_match_sequential_loop() {
        let prior = RatePrior::lognormal(0.3, 1.1).unwrap();
        let a = generate_assortment(&prior, 2_000, 3).unwrap();
        let process = DemandProcess::negative_binomial(1.5).unwrap();
        let parallel = realize_sales(&process, &a, 12).unwrap();
        let sequential: Vec<u64> = a
            .true_rates()
            .iter()
            .enumerate()
            .map(|(j, &r)| realize_sale(&process, j as u64, r, 12).unwrap())
            .collect();
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn zero_rates_sell_nothing() {
        let a = assortment(&[0.0; 50]);
        assert!(realize_sales(&DemandProcess::Poisson, &a, 1)
            .unwrap()
            .iter()
            .all(|&s| s == 0));
    }

    #[test]
    fn realized_mean_matches_rates() {
        let prior = RatePrior::gamma(1.0, 0.5).unwrap();
        let a = generate_assortment(&prior, 10_000, 8).unwrap();
        let s = realize_sales(&DemandProcess::Poisson, &a, 9).unwrap();
        let n = s.len() as f64;
        let s_mean = s.iter().map(|&x| x as f64).sum::<f64>() / n;
        let s2 = s.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / n;
        assert!((s_mean - a.mean_rate()).abs() < 4.0 * (s2 / n).sqrt());
    }

    #[test]
    fn realization_follows_item_ids_not_positions() {
        let prior = RatePrior::gamma(2.0, 1.0).unwrap();
        let a = generate_assortment(&prior, 300, 4).unwrap();
        let outcomes = realize_sales(&DemandProcess::Poisson, &a, 6).unwrap();
        let perm = permutation(300, 99);
        let permuted: Vec<u64> = perm
            .iter()
            .map(|&j| {
                realize_sale(&DemandProcess::Poisson, j as u64, a.true_rates()[j], 6).unwrap()
            })
            .collect();
        let expected: Vec<u64> = perm.iter().map(|&j| outcomes[j]).collect();
        assert_eq!(permuted, expected);
    }

    #[test]
    fn distortion_examples() {
        let a = assortment(&[1.0, 2.0, 3.0]);
        assert_eq!(
            apply_distortion(&a, &DistortionStrategy::Honest),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            apply_distortion(&a, &DistortionStrategy::ConstantMean),
            vec![2.0, 2.0, 2.0]
        );
        let ex = DistortionStrategy::exaggerate(2.0, 1e-9).unwrap();
        assert_eq!(apply_distortion(&a, &ex), vec![1e-9, 2.0, 4.0]);
    }

    #[test]
    fn exaggeration_validation() {
        assert!(DistortionStrategy::exaggerate(0.0, 1e-9).is_err());
        assert!(DistortionStrategy::exaggerate(2.0, 0.0).is_err());
    }

    #[test]
    fn build_pairs_examples() {
        let pairs = build_pairs(&[1.5], &[2]).unwrap();
        assert_eq!(
            pairs,
            vec![ForecastOutcomePair {
                item_id: 0,
                prediction: 1.5,
                outcome: 2
            }]
        );
        assert!(build_pairs(&[], &[]).unwrap().is_empty());
        assert!(matches!(
            build_pairs(&[1.0, 2.0], &[1, 2, 3]),
            Err(Error::LengthMismatch { left: 2, right: 3 })
        ));
    }

    proptest! {
        #[test]
        fn permutation_is_a_bijection(n in 0usize..300, seed: u64) {
            let mut p = permutation(n, seed);
            p.sort_unstable();
            prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn permutation_and_constant_preserve_mean(
            rates in prop::collection::vec(0.0f64..50.0, 1..200),
            seed: u64,
        ) {
            let a = Assortment::new(rates).unwrap();
            let mean = a.mean_rate();
            for strategy in [DistortionStrategy::Permutation { seed }, DistortionStrategy::ConstantMean] {
                let p = apply_distortion(&a, &strategy);
                let m = compensated_sum(p.iter().copied()) / p.len() as f64;
                prop_assert!((m - mean).abs() <= 1e-12 * mean.max(1.0));
            }
        }

        #[test]
        fn unit_exaggeration_is_identity_above_floor(rates in prop::collection::vec(1e-6f64..50.0, 1..100)) {
            let a = Assortment::new(rates.clone()).unwrap();
            let out = apply_distortion(&a, &DistortionStrategy::Exaggerate { gamma: 1.0, floor: 1e-9 });
            for (x, y) in rates.iter().zip(&out) {
                prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
            }
        }

        #[test]
        fn exaggeration_preserves_order(
            rates in prop::collection::vec(0.0f64..50.0, 1..100),
            gamma in 0.1f64..5.0,
        ) {
            let a = Assortment::new(rates.clone()).unwrap();
            let out = apply_distortion(&a, &DistortionStrategy::Exaggerate { gamma, floor: 1e-9 });
            for i in 0..rates.len() {
                prop_assert!(out[i] > 0.0);
                for j in 0..rates.len() {
                    if rates[i] <= rates[j] {
                        prop_assert!(out[i] <= out[j]);
                    }
                }
            }
        }
    }
}
