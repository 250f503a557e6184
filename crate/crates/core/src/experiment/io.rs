use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::Format;
use super::runner::ExperimentReport;
use crate::error::{Error, Result};
use crate::market::ForecastOutcomePair;

pub const PAIR_COLUMNS: [&str; 3] = ["item_id", "prediction", "outcome"];
pub const GLOBAL_COLUMNS: [&str; 8] = [
    "n",
    "mean_prediction",
    "mean_outcome",
    "difference",
    "stderr",
    "z",
    "significant_at_3sigma",
    "degenerate",
];
pub const FORWARD_COLUMNS: [&str; 8] = [
    "lo",
    "hi",
    "count",
    "mean_prediction",
    "mean_outcome",
    "stderr",
    "z",
    "flagged",
];
pub const BACKWARD_COLUMNS: [&str; 5] = [
    "s",
    "count",
    "mean_prediction",
    "stderr",
    "analytic_hindsight_mean",
];

fn data_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads `item_id,prediction,outcome` rows in file order.
///
/// The header must name all three columns (in any order). Line numbers in
/// errors count the header as line 1.
pub fn load_pairs(path: &Path, outcome_cap: u64) -> Result<Vec<ForecastOutcomePair>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| data_error(path, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(data_error(path, 1, "empty file"));
    }
    let mut index = [0usize; 3];
    for (slot, name) in index.iter_mut().zip(PAIR_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_error(path, 1, format!("missing column `{name}`")))?;
    }

    let mut pairs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(index[i]).unwrap_or("");
        let item_id: u64 = field(0)
            .parse()
            .map_err(|_| data_error(path, line, format!("invalid item_id `{}`", field(0))))?;
        let prediction: f64 = field(1)
            .parse()
            .map_err(|_| data_error(path, line, format!("invalid prediction `{}`", field(1))))?;
        if !(prediction.is_finite() && prediction >= 0.0) {
            return Err(data_error(
                path,
                line,
                format!(
                    "prediction must be finite and nonnegative, got {}",
                    field(1)
                ),
            ));
        }
        let outcome: u64 = field(2).parse().map_err(|_| {
            data_error(
                path,
                line,
                format!("outcome must be a nonnegative integer, got `{}`", field(2)),
            )
        })?;
        if outcome > outcome_cap {
            return Err(data_error(
                path,
                line,
                format!("outcome {outcome} exceeds the cap {outcome_cap}"),
            ));
        }
        pairs.push(ForecastOutcomePair {
            item_id,
            prediction,
            outcome,
        });
    }
    if pairs.is_empty() {
        return Err(data_error(path, 1, "no data rows after the header"));
    }
    Ok(pairs)
}

/// Writes pairs in the format [`load_pairs`] reads.
pub fn write_pairs(path: &Path, pairs: &[ForecastOutcomePair]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| io_error(path, e);
    w.write_record(PAIR_COLUMNS).map_err(io)?;
    for p in pairs {
        w.write_record([
            p.item_id.to_string(),
            num(p.prediction),
            p.outcome.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `report.json`, or the three CSV tables, into `dir`. Returns the
/// files written.
pub fn write_report(report: &ExperimentReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    match format {
        Format::Json => {
            let path = dir.join("report.json");
            let mut text = report_json(report)?;
            text.push('\n');
            let mut f = File::create(&path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            f.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            Ok(vec![path])
        }
        Format::Csv => {
            let global = dir.join("global.csv");
            let forward = dir.join("forward_buckets.csv");
            let backward = dir.join("backward_groups.csv");
            write_global(report, &global)?;
            write_forward(report, &forward)?;
            write_backward(report, &backward)?;
            Ok(vec![global, forward, backward])
        }
    }
}

/// Pretty JSON form of a report, without a trailing newline.
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("cannot serialise report: {e}")))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn io_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

/// Shortest round-trip decimal form; never locale-dependent.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_global(report: &ExperimentReport, path: &Path) -> Result<()> {
    let g = &report.global;
    let mut w = csv_writer(path)?;
    w.write_record(GLOBAL_COLUMNS)
        .map_err(|e| io_error(path, e))?;
    w.write_record([
        g.n.to_string(),
        num(g.mean_prediction),
        num(g.mean_outcome),
        num(g.difference),
        opt(g.stderr),
        opt(g.z_score),
        g.significant_at_3sigma.to_string(),
        g.degenerate.to_string(),
    ])
    .map_err(|e| io_error(path, e))?;
    finish(w, path)
}

fn write_forward(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(FORWARD_COLUMNS)
        .map_err(|e| io_error(path, e))?;
    for b in &report.forward_buckets {
        w.write_record([
            num(b.lo),
            num(b.hi),
            b.count.to_string(),
            opt(b.mean_prediction),
            opt(b.mean_outcome),
            num(b.outcome_stderr),
            opt(b.z_score),
            b.flagged_low_count.to_string(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    finish(w, path)
}

fn write_backward(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BACKWARD_COLUMNS)
        .map_err(|e| io_error(path, e))?;
    for g in &report.backward_groups {
        w.write_record([
            g.outcome.to_string(),
            g.count.to_string(),
            num(g.mean_prediction),
            num(g.prediction_stderr),
            opt(g.analytic_hindsight_mean),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    finish(w, path)
}
