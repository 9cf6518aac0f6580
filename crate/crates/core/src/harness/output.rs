use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::experiment::{ConvergenceRow, HeatmapCell, SummaryRow, TrialRecord};
use crate::error::{Error, Result};

/// Exact header line of a results CSV file.
pub const RESULTS_HEADER: &str =
    "scheme,sweep_param,sweep_value,trial,seed,min_rate_bps_hz,iterations,violations,wall_ms";

const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::config(format!(
                "unknown format `{s}` (expected csv or json)"
            ))),
        }
    }
}

/// Rounds to `digits` significant decimal digits; non-finite values pass
/// through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn r9(x: f64) -> f64 {
    round_sig(x, SIGNIFICANT_DIGITS)
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    }
}

/// Opens `path` for writing, or stdout when `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(io_err(path))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_err(path: Option<&Path>) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path)(source),
        other => Error::Format {
            path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
            message: format!("{other:?}"),
        },
    }
}

fn write_csv<T: Serialize>(rows: &[T], header: &str, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    writeln!(out, "{header}").map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Format {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        message: e.to_string(),
    })?;
    writeln!(out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn write_rows<T: Serialize>(
    rows: &[T],
    header: &str,
    path: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, header, path),
        OutputFormat::Json => write_json(rows, path),
    }
}

/// Writes trial records to `path` (stdout when `None`), floats rounded to 9
/// significant digits.
pub fn emit_results(
    records: &[TrialRecord],
    path: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let rows: Vec<TrialRecord> = records
        .iter()
        .map(|r| TrialRecord {
            sweep_value: r9(r.sweep_value),
            min_rate_bps_hz: r9(r.min_rate_bps_hz),
            wall_ms: r9(r.wall_ms),
            ..r.clone()
        })
        .collect();
    write_rows(&rows, RESULTS_HEADER, path, format)
}

/// Reads records written by [`emit_results`].
pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<TrialRecord>> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(io_err(Some(path)))?;
    match format {
        OutputFormat::Json => {
            serde_json::from_reader(io::BufReader::new(file)).map_err(|e| bad(e.to_string()))
        }
        OutputFormat::Csv => {
            let mut r = csv::Reader::from_reader(file);
            let header = r.headers().map_err(csv_err(Some(path)))?;
            let header: Vec<&str> = header.iter().collect();
            if header.join(",") != RESULTS_HEADER {
                return Err(bad(format!("unexpected header `{}`", header.join(","))));
            }
            r.deserialize()
                .map(|row| row.map_err(csv_err(Some(path))))
                .collect()
        }
    }
}

/// Per-group mean and standard deviation, CSV or JSON.
pub fn emit_summary(rows: &[SummaryRow], path: Option<&Path>, format: OutputFormat) -> Result<()> {
    let rows: Vec<SummaryRow> = rows
        .iter()
        .map(|r| SummaryRow {
            sweep_value: r9(r.sweep_value),
            mean_min_rate_bps_hz: r9(r.mean_min_rate_bps_hz),
            std_min_rate_bps_hz: r9(r.std_min_rate_bps_hz),
            ..r.clone()
        })
        .collect();
    write_rows(
        &rows,
        "scheme,sweep_param,sweep_value,trials,mean_min_rate_bps_hz,std_min_rate_bps_hz",
        path,
        format,
    )
}

pub fn emit_convergence(
    rows: &[ConvergenceRow],
    path: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let rows: Vec<ConvergenceRow> = rows
        .iter()
        .map(|r| ConvergenceRow {
            gbest_fitness: r9(r.gbest_fitness),
            gbest_rate_bps_hz: r9(r.gbest_rate_bps_hz),
            signal_norm: r9(r.signal_norm),
            interference_norm: r9(r.interference_norm),
            ..*r
        })
        .collect();
    write_rows(
        &rows,
        "iteration,gbest_fitness,gbest_rate_bps_hz,gbest_violations,signal_norm,interference_norm",
        path,
        format,
    )
}

pub fn emit_heatmap(
    cells: &[HeatmapCell],
    path: Option<&Path>,
    format: OutputFormat,
) -> Result<()> {
    let rows: Vec<HeatmapCell> = cells
        .iter()
        .map(|c| HeatmapCell {
            x_m: r9(c.x_m),
            y_m: r9(c.y_m),
            gain_db: r9(c.gain_db),
            ..*c
        })
        .collect();
    write_rows(&rows, "user,x_m,y_m,gain_db", path, format)
}
