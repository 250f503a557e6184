use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Mode};
use super::io::load_pairs;
use crate::error::{Error, Result, Stage};
use crate::evaluation::{
    backward_groups, backward_tail_gap, calibration_verdict, forward_buckets, global_bias_test,
    make_buckets, BiasTestResult, BucketReport, CalibrationVerdict, OutcomeGroupReport,
};
use crate::market::{
    apply_distortion, build_pairs, generate_assortment, realize_sales, ForecastOutcomePair,
};
use crate::rng::RNG_IDENTITY;

/// Facts about the run that are not configuration. Deliberately excludes
/// timestamps, host names and thread counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub crate_version: String,
    pub rng: String,
    pub pair_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: RunMetadata,
    pub config: ExperimentConfig,
    pub global: BiasTestResult,
    pub forward_buckets: Vec<BucketReport>,
    pub calibration: CalibrationVerdict,
    pub backward_groups: Vec<OutcomeGroupReport>,
    /// Count-weighted mean `|r̄^(s) − s|` over the top `tail_fraction` of outcomes.
    pub backward_tail_gap: Option<f64>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    /// True unless the forward calibration verdict failed.
    pub fn passed(&self) -> bool {
        self.calibration.pass
    }
}

/// Produces the forecast/outcome pairs the config describes.
pub fn experiment_pairs(config: &ExperimentConfig) -> Result<Vec<ForecastOutcomePair>> {
    match config.mode {
        Mode::Simulate => simulate(config).map_err(|e| e.at_stage(Stage::Simulate)),
        Mode::EvaluateFile => {
            let path = config.input.as_deref().expect("validated");
            load_pairs(path, config.outcome_cap).map_err(|e| e.at_stage(Stage::Load))
        }
    }
}

fn simulate(config: &ExperimentConfig) -> Result<Vec<ForecastOutcomePair>> {
    let (Some(prior), Some(process), Some(n), Some(seed)) =
        (&config.prior, &config.process, config.n, config.seed)
    else {
        unreachable!("validated simulate config");
    };
    let assortment = generate_assortment(prior, n, seed)?;
    let outcomes = realize_sales(process, &assortment, seed)?;
    let predictions = apply_distortion(&assortment, &config.distortion);
    build_pairs(&predictions, &outcomes)
}

/// Runs every evaluation the config asks for. Deterministic in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate().map_err(|e| e.at_stage(Stage::Config))?;
    let pairs = experiment_pairs(config)?;
    evaluate_pairs(config, &pairs)
}

/// Evaluation half of [`run_experiment`], for pairs obtained elsewhere.
pub fn evaluate_pairs(
    config: &ExperimentConfig,
    pairs: &[ForecastOutcomePair],
) -> Result<ExperimentReport> {
    let evaluate = |e: Error| e.at_stage(Stage::Evaluate);
    let mut warnings = Vec::new();

    let global = global_bias_test(pairs).map_err(evaluate)?;
    if global.degenerate {
        warnings.push(format!(
            "global test is degenerate (n = {}): no usable standard error",
            global.n
        ));
    }

    let layout = make_buckets(pairs, &config.buckets).map_err(evaluate)?;
    if layout.merged {
        warnings.push(format!(
            "quantile buckets merged: {} distinct buckets instead of the requested count",
            layout.len()
        ));
    }
    let forward = forward_buckets(pairs, &config.buckets).map_err(evaluate)?;
    let flagged = forward
        .iter()
        .filter(|b| b.count > 0 && b.flagged_low_count)
        .count();
    if flagged > 0 {
        warnings.push(format!(
            "{flagged} nonempty bucket(s) below min_count {} were not tested",
            config.buckets.min_count
        ));
    }
    let calibration = calibration_verdict(&forward, config.z_crit);
    if calibration.tested_buckets == 0 {
        warnings.push("no bucket had enough pairs to test calibration".into());
    }

    let oracle = if config.oracle {
        config
            .oracle_context()
            .map_err(|e| e.at_stage(Stage::Oracle))?
    } else {
        None
    };
    let backward = backward_groups(pairs, oracle.as_ref()).map_err(|e| match e {
        e @ (Error::Quadrature { .. } | Error::ZeroMass(_) | Error::Domain(_)) => {
            e.at_stage(Stage::Oracle)
        }
        e => e.at_stage(Stage::Evaluate),
    })?;
    let tail_gap = backward_tail_gap(&backward, config.tail_fraction);

    Ok(ExperimentReport {
        metadata: RunMetadata {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_IDENTITY.to_string(),
            pair_count: pairs.len() as u64,
        },
        config: config.clone(),
        global,
        forward_buckets: forward,
        calibration,
        backward_groups: backward,
        backward_tail_gap: tail_gap,
        warnings,
    })
}
