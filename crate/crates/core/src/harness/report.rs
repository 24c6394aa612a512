use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ChainTag, Format, RunReport, Sweep};
use crate::error::{Error, Result};

/// Report columns in emission order.
pub const REPORT_COLUMNS: [&str; 19] = [
    "model",
    "prior",
    "backend",
    "n",
    "p/H",
    "seed",
    "mean_E",
    "per_block_E",
    "N_it",
    "t_s",
    "N_it_per_s",
    "lpml",
    "waic",
    "kl",
    "error",
    "n_divergences",
    "dataset",
    "chain",
    "note",
];

/// A metric cell: a value, absent (empty), or skipped (`-`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Empty,
    Skipped,
}

impl Cell {
    fn from_opt(v: Option<f64>) -> Self {
        match v {
            Some(x) if x.is_finite() => Cell::Value(x),
            _ => Cell::Empty,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v:?}"),
            Cell::Empty => Ok(()),
            Cell::Skipped => f.write_str("-"),
        }
    }
}

impl std::str::FromStr for Cell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Ok(Cell::Empty),
            "-" => Ok(Cell::Skipped),
            _ => s.parse().map(Cell::Value).map_err(|_| Error::Config(format!("bad metric cell `{s}`"))),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Value(v) => s.serialize_f64(*v),
            Cell::Empty => s.serialize_none(),
            Cell::Skipped => s.serialize_str("-"),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
            Null(()),
        }
        match Option::<Raw>::deserialize(d)? {
            None | Some(Raw::Null(())) => Ok(Cell::Empty),
            Some(Raw::Num(v)) => Ok(Cell::Value(v)),
            Some(Raw::Str(s)) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Flat report row as written to CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub prior: String,
    pub backend: String,
    pub n: usize,
    #[serde(rename = "p/H")]
    pub p_or_h: usize,
    pub seed: u64,
    #[serde(rename = "mean_E")]
    pub mean_e: Cell,
    /// `block:value` pairs separated by `;`, or `-` when skipped.
    #[serde(rename = "per_block_E")]
    pub per_block_e: String,
    #[serde(rename = "N_it")]
    pub n_it: Cell,
    pub t_s: Cell,
    #[serde(rename = "N_it_per_s")]
    pub n_it_per_s: Cell,
    pub lpml: Cell,
    pub waic: Cell,
    pub kl: Cell,
    pub error: Cell,
    pub n_divergences: Cell,
    pub dataset: usize,
    /// Chain index, or `pooled`.
    pub chain: String,
    pub note: String,
}

impl ReportRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.prior.clone(),
            self.backend.clone(),
            self.n.to_string(),
            self.p_or_h.to_string(),
            self.seed.to_string(),
            self.mean_e.to_string(),
            self.per_block_e.clone(),
            self.n_it.to_string(),
            self.t_s.to_string(),
            self.n_it_per_s.to_string(),
            self.lpml.to_string(),
            self.waic.to_string(),
            self.kl.to_string(),
            self.error.to_string(),
            self.n_divergences.to_string(),
            self.dataset.to_string(),
            self.chain.clone(),
            self.note.clone(),
        ]
    }

    fn from_fields(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != REPORT_COLUMNS.len() {
            return Err(Error::Shape { expected: REPORT_COLUMNS.len(), got: f.len() });
        }
        let int = |i: usize| f[i].parse::<u64>().map_err(|_| Error::Config(format!("bad integer `{}` in column {}", &f[i], REPORT_COLUMNS[i])));
        let cell = |i: usize| f[i].parse::<Cell>();
        Ok(ReportRow {
            model: f[0].to_string(),
            prior: f[1].to_string(),
            backend: f[2].to_string(),
            n: int(3)? as usize,
            p_or_h: int(4)? as usize,
            seed: int(5)?,
            mean_e: cell(6)?,
            per_block_e: f[7].to_string(),
            n_it: cell(8)?,
            t_s: cell(9)?,
            n_it_per_s: cell(10)?,
            lpml: cell(11)?,
            waic: cell(12)?,
            kl: cell(13)?,
            error: cell(14)?,
            n_divergences: cell(15)?,
            dataset: int(16)? as usize,
            chain: f[17].to_string(),
            note: f[18].to_string(),
        })
    }
}

impl From<&RunReport> for ReportRow {
    fn from(r: &RunReport) -> Self {
        let chain = match r.chain {
            ChainTag::Single(k) => k.to_string(),
            ChainTag::Pooled => "pooled".to_string(),
        };
        let mut row = ReportRow {
            model: r.prior.family().tag().to_string(),
            prior: r.prior.tag().to_string(),
            backend: r.backend.tag().to_string(),
            n: r.n,
            p_or_h: r.p_or_h,
            seed: r.seed,
            mean_e: Cell::Skipped,
            per_block_e: "-".to_string(),
            n_it: Cell::Skipped,
            t_s: Cell::Skipped,
            n_it_per_s: Cell::Skipped,
            lpml: Cell::Skipped,
            waic: Cell::Skipped,
            kl: Cell::Skipped,
            error: Cell::Skipped,
            n_divergences: Cell::Skipped,
            dataset: r.dataset,
            chain,
            note: String::new(),
        };
        match &r.outcome {
            Err(note) => row.note = note.clone(),
            Ok(m) => {
                row.mean_e = Cell::from_opt(Some(m.mean_e));
                row.per_block_e =
                    m.per_block_e.iter().map(|(b, e)| format!("{b}:{e:?}")).collect::<Vec<_>>().join(";");
                row.n_it = Cell::Value(m.n_it as f64);
                row.t_s = Cell::from_opt(Some(m.t_s));
                row.n_it_per_s = Cell::from_opt(Some(m.n_it_per_s));
                row.lpml = Cell::from_opt(Some(m.fit.lpml));
                row.waic = Cell::from_opt(Some(m.fit.waic));
                row.kl = Cell::from_opt(m.fit.kl);
                row.error = Cell::from_opt(m.fit.error);
                row.n_divergences = Cell::from_opt(m.n_divergences.map(|d| d as f64));
            }
        }
        row
    }
}

/// Per-backend summary of a sweep metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub prior: String,
    pub backend: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Write report rows in the given format to any writer.
pub fn write_report<W: std::io::Write>(reports: &[RunReport], format: Format, mut out: W) -> Result<()> {
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(REPORT_COLUMNS)?;
            for r in &rows {
                w.write_record(r.fields())?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

/// Write `report.csv` or `report.json` into `dir`.
pub fn emit_report(reports: &[RunReport], format: Format, dir: &Path) -> Result<PathBuf> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to emit".into()));
    }
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report.{}", ext(format)));
    write_report(reports, format, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    Ok(path)
}

/// Write the per-dataset report, the per-backend summary and a long-format
/// `long.csv` (`prior,backend,dataset,metric,value`) for histograms.
pub fn emit_sweep(sweep: &Sweep, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let report = emit_report(&sweep.rows, format, dir)?;
    let summary = dir.join(format!("summary.{}", ext(format)));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(&summary)?;
            for s in &sweep.summary {
                w.serialize(s)?;
            }
            w.flush()?;
        }
        Format::Json => std::fs::write(&summary, serde_json::to_string_pretty(&sweep.summary)?)?,
    }
    let long = dir.join("long.csv");
    let mut w = csv::Writer::from_path(&long)?;
    w.write_record(["prior", "backend", "dataset", "metric", "value"])?;
    for r in &sweep.rows {
        let Some(m) = r.metrics() else { continue };
        for (metric, v) in [("mean_E", m.mean_e), ("N_it_per_s", m.n_it_per_s)] {
            w.write_record([r.prior.tag(), r.backend.tag(), &r.dataset.to_string(), metric, &format!("{v:?}")])?;
        }
    }
    w.flush()?;
    Ok(vec![report, summary, long])
}

/// Parse a CSV report written by [`emit_report`].
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<&str> = r.headers()?.iter().collect();
    if header != REPORT_COLUMNS {
        return Err(Error::Config(format!("unexpected report header {header:?}")));
    }
    r.records().map(|rec| ReportRow::from_fields(&rec?)).collect()
}
