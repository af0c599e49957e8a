//! CSV and JSON time-series output.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ScenarioConfig;
use super::WindowResult;

pub const CSV_COLUMNS: [&str; 13] = [
    "window_index",
    "protocol",
    "t_start_s",
    "mean_beta_rad",
    "Q",
    "sigma_Q",
    "C",
    "sigma_C",
    "E_bits",
    "r",
    "detection_rate_hz",
    "aborted",
    "abort_reason",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!(
                "unknown output format `{other}` (expected csv or json)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("no results to write")]
    Empty,

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed output: {0}")]
    Malformed(String),
}

/// Provenance recorded with every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RunMeta {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: config.config_hash(),
        }
    }

    fn header_comment(&self) -> String {
        format!(
            "# rfiqkd {} seed={} config_hash={}",
            self.tool_version, self.seed, self.config_hash
        )
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// removed, exponent notation outside `1e-4 <= |x| < 1e9`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One result row with every number at output precision. Identical for
/// the CSV and JSON encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub window_index: u64,
    pub protocol: String,
    pub t_start_s: Option<f64>,
    pub mean_beta_rad: Option<f64>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    #[serde(rename = "sigma_Q")]
    pub sigma_q: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "sigma_C")]
    pub sigma_c: Option<f64>,
    #[serde(rename = "E_bits")]
    pub e_bits: Option<f64>,
    pub r: Option<f64>,
    pub detection_rate_hz: Option<f64>,
    pub aborted: bool,
    pub abort_reason: Option<String>,
}

fn text_fields(r: &WindowResult) -> [String; 13] {
    let num = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
    let est = r.estimate();
    [
        r.window_index.to_string(),
        r.protocol.to_string(),
        format_sig9(r.t_start),
        format_sig9(r.mean_beta),
        num(est.map(|e| e.q)),
        num(est.map(|e| e.sigma_q)),
        num(est.and_then(|e| e.c)),
        num(est.and_then(|e| e.sigma_c)),
        num(est.map(|e| e.eve_bits)),
        num(est.map(|e| e.rate)),
        format_sig9(r.detection_rate),
        r.aborted().to_string(),
        r.outcome.abort.map(|a| a.code()).unwrap_or_default(),
    ]
}

fn parse_num(field: &str) -> Result<Option<f64>, OutputError> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| OutputError::Malformed(format!("not a number: `{field}`")))
}

impl OutputRow {
    fn from_fields(f: &[&str]) -> Result<Self, OutputError> {
        if f.len() != CSV_COLUMNS.len() {
            return Err(OutputError::Malformed(format!(
                "expected 13 fields, got {}",
                f.len()
            )));
        }
        let bad = |what: &str| OutputError::Malformed(what.to_string());
        Ok(OutputRow {
            window_index: f[0].parse().map_err(|_| bad("window_index"))?,
            protocol: f[1].to_string(),
            t_start_s: parse_num(f[2])?,
            mean_beta_rad: parse_num(f[3])?,
            q: parse_num(f[4])?,
            sigma_q: parse_num(f[5])?,
            c: parse_num(f[6])?,
            sigma_c: parse_num(f[7])?,
            e_bits: parse_num(f[8])?,
            r: parse_num(f[9])?,
            detection_rate_hz: parse_num(f[10])?,
            aborted: f[11].parse().map_err(|_| bad("aborted"))?,
            abort_reason: (!f[12].is_empty()).then(|| f[12].to_string()),
        })
    }

    pub fn from_result(r: &WindowResult) -> Self {
        let fields = text_fields(r);
        let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        OutputRow::from_fields(&refs).expect("formatted fields parse back")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDocument {
    meta: RunMeta,
    rows: Vec<OutputRow>,
}

/// Renders results in `format`.
pub fn render(
    results: &[WindowResult],
    meta: &RunMeta,
    format: OutputFormat,
) -> Result<String, OutputError> {
    if results.is_empty() {
        return Err(OutputError::Empty);
    }
    match format {
        OutputFormat::Csv => {
            let mut out = meta.header_comment().into_bytes();
            out.push(b'\n');
            let mut writer = csv::Writer::from_writer(out);
            let io = |e: csv::Error| OutputError::Malformed(e.to_string());
            writer.write_record(CSV_COLUMNS).map_err(io)?;
            for r in results {
                writer.write_record(text_fields(r)).map_err(io)?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| OutputError::Malformed(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
        }
        OutputFormat::Json => {
            let doc = JsonDocument {
                meta: meta.clone(),
                rows: results.iter().map(OutputRow::from_result).collect(),
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("rows serialize");
            text.push('\n');
            Ok(text)
        }
    }
}

/// Writes results to `path`.
pub fn emit_results(
    results: &[WindowResult],
    meta: &RunMeta,
    format: OutputFormat,
    path: &Path,
) -> Result<(), OutputError> {
    let text = render(results, meta, format)?;
    std::fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses CSV output back into rows, checking the header.
pub fn parse_csv(text: &str) -> Result<(Option<String>, Vec<OutputRow>), OutputError> {
    let comment = text
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .map(str::to_owned);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |e: csv::Error| OutputError::Malformed(e.to_string());
    let header = reader.headers().map_err(bad)?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(OutputError::Malformed(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(bad)?;
        let fields: Vec<&str> = record.iter().collect();
        rows.push(OutputRow::from_fields(&fields)?);
    }
    Ok((comment, rows))
}

/// Parses JSON output back into metadata and rows.
pub fn parse_json(text: &str) -> Result<(RunMeta, Vec<OutputRow>), OutputError> {
    let doc: JsonDocument =
        serde_json::from_str(text).map_err(|e| OutputError::Malformed(e.to_string()))?;
    Ok((doc.meta, doc.rows))
}
