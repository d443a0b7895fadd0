use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::sweep::{SweepResult, SweepRow};
use crate::error::{LabError, Result};

pub const CSV_HEADER: [&str; 9] = ["n", "t", "x", "variant", "value", "limit", "abs_error", "status", "wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(LabError::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
fn render(v: f64) -> String {
    format!("{v:.16e}")
}

fn render_opt(v: Option<f64>) -> String {
    v.map(render).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LabError + '_ {
    move |source| LabError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt_err(path: &Path, message: impl Into<String>) -> LabError {
    LabError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// CSV text for a result: header plus one line per row.
pub fn to_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| LabError::Format {
        path: "<memory>".into(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            render(r.t),
            render(r.x),
            r.variant.clone(),
            render_opt(r.value),
            render_opt(r.limit),
            render_opt(r.abs_error),
            r.status.clone(),
            render_opt(r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Format {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Pretty JSON array of row objects with the CSV column names as keys.
pub fn to_json(result: &SweepResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&result.rows).map_err(|e| LabError::Format {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

/// Writes the result at `path` in the given format.
pub fn emit(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv(result)?,
        OutputFormat::Json => to_json(result)?,
    };
    std::fs::write(path, text).map_err(io_err(path))
}

fn parse_f64(path: &Path, line: usize, field: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| fmt_err(path, format!("line {line}: bad {field} {s:?}")))
}

/// Parses CSV text produced by [`to_csv`].
pub fn from_csv(text: &str, path: &Path) -> Result<SweepResult> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| fmt_err(path, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(fmt_err(path, format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| fmt_err(path, e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("");
        let n = f(0)
            .parse()
            .map_err(|_| fmt_err(path, format!("line {line}: bad n {:?}", f(0))))?;
        let need = |k: usize, name: &str| -> Result<f64> {
            parse_f64(path, line, name, f(k))?.ok_or_else(|| fmt_err(path, format!("line {line}: missing {name}")))
        };
        rows.push(SweepRow {
            n,
            t: need(1, "t")?,
            x: need(2, "x")?,
            variant: f(3).to_string(),
            value: parse_f64(path, line, "value", f(4))?,
            limit: parse_f64(path, line, "limit", f(5))?,
            abs_error: parse_f64(path, line, "abs_error", f(6))?,
            status: f(7).to_string(),
            wall_ms: parse_f64(path, line, "wall_ms", f(8))?,
        });
    }
    check_rows(SweepResult { rows }, path)
}

/// Recomputes `abs_error` from `value` and `limit` and rejects mismatches.
fn check_rows(result: SweepResult, path: &Path) -> Result<SweepResult> {
    for (i, r) in result.rows.iter().enumerate() {
        let expect = r.recompute_error();
        let consistent = match (expect, r.abs_error) {
            (None, None) => true,
            (Some(a), Some(b)) => a == b,
            _ => false,
        };
        if !consistent {
            return Err(fmt_err(
                path,
                format!("row {i}: abs_error {:?} does not match |value − limit| = {:?}", r.abs_error, expect),
            ));
        }
    }
    Ok(result)
}

pub fn from_json(text: &str, path: &Path) -> Result<SweepResult> {
    let rows: Vec<SweepRow> = serde_json::from_str(text).map_err(|e| fmt_err(path, e.to_string()))?;
    check_rows(SweepResult { rows }, path)
}

/// Reads a result written by [`emit`].
pub fn load(path: &Path, format: OutputFormat) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => from_csv(&text, path),
        OutputFormat::Json => from_json(&text, path),
    }
}
