//! Command-line runner for forecast evaluation experiments.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hindsight::experiment::{
    load_config, report_json, run_experiment, write_report, ExperimentConfig, Format, Mode,
};
use hindsight::{Error, Result, Stage};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERDICT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "hindsight",
    version,
    about = "Forward- and backward-looking evaluation of rate forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory; JSON goes to stdout when neither this nor `output.dir` is set.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Exit with status 3 when the calibration verdict fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an assortment and one day of sales, then evaluate.
    Simulate,
    /// Evaluate pairs from a CSV file with columns item_id,prediction,outcome.
    Evaluate {
        /// Overrides the config `input`.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Print the target pmf and hindsight mean for s = 0..=s_max.
    Oracle {
        #[arg(long, default_value_t = 20)]
        s_max: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_DATA
            })
        }
    }
}

fn resolve_config(cli: &Cli, mode: Mode) -> Result<ExperimentConfig> {
    let mut config = load_config(cli.config.as_deref(), std::env::vars())?;
    config.mode = mode;
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        config.output.dir = Some(out.clone());
    }
    if let Some(format) = cli.format {
        config.output.format = format.into();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mode = match &cli.command {
        Command::Simulate | Command::Oracle { .. } => Mode::Simulate,
        Command::Evaluate { .. } => Mode::EvaluateFile,
    };
    let mut config = resolve_config(&cli, mode).map_err(|e| e.at_stage(Stage::Config))?;
    match cli.command {
        Command::Oracle { s_max } => oracle(&config, s_max),
        Command::Evaluate { input } => {
            if input.is_some() {
                config.input = input;
            }
            experiment(&config, cli.strict)
        }
        Command::Simulate => experiment(&config, cli.strict),
    }
}

fn experiment(config: &ExperimentConfig, strict: bool) -> Result<ExitCode> {
    let report = run_experiment(config)?;
    let write = |e: Error| e.at_stage(Stage::Write);
    match (&config.output.dir, config.output.format) {
        (Some(dir), format) => {
            write_report(&report, format, dir).map_err(write)?;
        }
        (None, Format::Json) => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", report_json(&report)?).map_err(|source| {
                write(Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
            })?;
        }
        (None, Format::Csv) => {
            return Err(Error::Config("csv output needs --out or output.dir".into())
                .at_stage(Stage::Config));
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if strict && !report.passed() {
        eprintln!("calibration verdict: fail");
        return Ok(ExitCode::from(EXIT_VERDICT));
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(config: &ExperimentConfig, s_max: u64) -> Result<ExitCode> {
    let ctx = config
        .oracle_context()?
        .ok_or_else(|| Error::Config("oracle needs prior and process".into()))?;
    let mut text = String::from("s,target_pmf,hindsight_mean\n");
    for s in 0..=s_max {
        let pmf = ctx.target_pmf(s).map_err(|e| e.at_stage(Stage::Oracle))?;
        let mean = match ctx.hindsight_mean(s) {
            Ok(m) => m.to_string(),
            Err(Error::ZeroMass(_)) => String::new(),
            Err(e) => return Err(e.at_stage(Stage::Oracle)),
        };
        text.push_str(&format!("{s},{pmf},{mean}\n"));
    }
    match &config.output.dir {
        Some(dir) => write_curve(dir, &text).map_err(|e| e.at_stage(Stage::Write))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_curve(dir: &Path, text: &str) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join("hindsight_curve.csv");
    std::fs::write(&path, text).map_err(io(&path))
}
