use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::{DemandProcess, RatePrior};
use crate::error::{Error, Result};
use crate::evaluation::{BucketSpec, DEFAULT_Z_CRIT};
use crate::market::DistortionStrategy;
use crate::oracle::{OracleContext, QuadratureSpec};

/// Prefix of environment variables that fill in absent config keys.
pub const ENV_PREFIX: &str = "HINDSIGHT_";

/// Observed outcomes above this are rejected as data errors unless configured.
pub const DEFAULT_OUTCOME_CAP: u64 = 1_000_000;

/// Share of pairs, ranked by outcome, that the backward tail gap looks at.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Simulate,
    #[serde(alias = "evaluate")]
    EvaluateFile,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// A complete experiment description, read from TOML.
///
/// The output section is not part of the serialised form so that a report's
/// config echo does not depend on where it was written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<RatePrior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<DemandProcess>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_distortion")]
    pub distortion: DistortionStrategy,
    #[serde(default)]
    pub buckets: BucketSpec,
    #[serde(default = "default_z_crit")]
    pub z_crit: f64,
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_outcome_cap")]
    pub outcome_cap: u64,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default, skip_serializing)]
    pub output: OutputSpec,
}

fn default_distortion() -> DistortionStrategy {
    DistortionStrategy::Honest
}

fn default_z_crit() -> f64 {
    DEFAULT_Z_CRIT
}

fn default_outcome_cap() -> u64 {
    DEFAULT_OUTCOME_CAP
}

fn default_tail_fraction() -> f64 {
    DEFAULT_TAIL_FRACTION
}

impl ExperimentConfig {
    /// Minimal simulation config; everything else at its default.
    pub fn simulate(prior: RatePrior, process: DemandProcess, n: usize, seed: u64) -> Self {
        ExperimentConfig {
            mode: Mode::Simulate,
            prior: Some(prior),
            process: Some(process),
            n: Some(n),
            seed: Some(seed),
            input: None,
            distortion: DistortionStrategy::Honest,
            buckets: BucketSpec::default(),
            z_crit: DEFAULT_Z_CRIT,
            oracle: false,
            quadrature: QuadratureSpec::default(),
            outcome_cap: DEFAULT_OUTCOME_CAP,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            output: OutputSpec::default(),
        }
    }

    /// Minimal file-evaluation config.
    pub fn evaluate_file(input: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            mode: Mode::EvaluateFile,
            prior: None,
            process: None,
            n: None,
            seed: None,
            input: Some(input.into()),
            distortion: DistortionStrategy::Honest,
            buckets: BucketSpec::default(),
            z_crit: DEFAULT_Z_CRIT,
            oracle: false,
            quadrature: QuadratureSpec::default(),
            outcome_cap: DEFAULT_OUTCOME_CAP,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_table(table)
    }

    /// Deserialises and validates.
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let config = Self::parse_table(table)?;
        config.validate()?;
        Ok(config)
    }

    /// Deserialises without the cross-field checks of [`validate`](Self::validate),
    /// for callers that patch fields first.
    pub fn parse_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let missing = |what: &str| Error::Config(format!("{what} is required in this mode"));
        match self.mode {
            Mode::Simulate => {
                if self.prior.is_none() {
                    return Err(missing("prior"));
                }
                if self.process.is_none() {
                    return Err(missing("process"));
                }
                match self.n {
                    None => return Err(missing("n")),
                    Some(0) => return Err(Error::Config("n must be positive".into())),
                    Some(_) => {}
                }
                if self.seed.is_none() {
                    return Err(missing("seed"));
                }
            }
            Mode::EvaluateFile => {
                if self.input.is_none() {
                    return Err(missing("input"));
                }
            }
        }
        if self.oracle && (self.prior.is_none() || self.process.is_none()) {
            return Err(Error::Config("oracle requires prior and process".into()));
        }
        if let Some(p) = &self.process {
            p.validate()?;
        }
        self.distortion.validate()?;
        self.buckets.validate()?;
        self.quadrature.validate()?;
        if !(self.z_crit.is_finite() && self.z_crit > 0.0) {
            return Err(Error::Config(format!(
                "z_crit must be positive, got {}",
                self.z_crit
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "tail_fraction must lie in (0, 1], got {}",
                self.tail_fraction
            )));
        }
        Ok(())
    }

    /// Oracle for the configured prior and process, if both are present.
    pub fn oracle_context(&self) -> Result<Option<OracleContext>> {
        match (&self.prior, &self.process) {
            (Some(prior), Some(process)) => Ok(Some(OracleContext::new(
                prior.clone(),
                *process,
                self.quadrature,
            )?)),
            _ => Ok(None),
        }
    }
}

/// Reads a TOML config file into a raw table.
pub fn read_config_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

/// Reads an optional config file, fills gaps from `vars` and deserialises the
/// result without validating it.
pub fn load_config<I, K, V>(path: Option<&Path>, vars: I) -> Result<ExperimentConfig>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut table = match path {
        Some(path) => read_config_table(path)?,
        None => toml::Table::new(),
    };
    apply_env_overrides(&mut table, vars)?;
    ExperimentConfig::parse_table(table)
}

/// Fills keys absent from `table` with values from `HINDSIGHT_*` variables.
///
/// `HINDSIGHT_SEED=7` sets `seed`; a double underscore descends into a table,
/// so `HINDSIGHT_OUTPUT__DIR=out` sets `output.dir`. Values are read as TOML
/// scalars and fall back to plain strings. Keys already present win.
pub fn apply_env_overrides<I, K, V>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut vars: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            k.as_ref()
                .strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_ascii_lowercase(), v.as_ref().to_string()))
        })
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<&str> = key.split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!(
                "malformed variable {ENV_PREFIX}{}",
                key.to_ascii_uppercase()
            )));
        }
        insert_if_absent(table, &path, scalar(&raw), &key)?;
    }
    Ok(())
}

fn scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn insert_if_absent(
    table: &mut toml::Table,
    path: &[&str],
    value: toml::Value,
    key: &str,
) -> Result<()> {
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cursor = table;
    for p in parents {
        let next = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = next.as_table_mut().ok_or_else(|| {
            Error::Config(format!(
                "{ENV_PREFIX}{}: `{p}` is not a table",
                key.to_ascii_uppercase()
            ))
        })?;
    }
    cursor.entry(last.to_string()).or_insert(value);
    Ok(())
}
