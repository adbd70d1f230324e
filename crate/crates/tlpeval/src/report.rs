//! Report serialization: JSON, long-format CSV and per-scorer scatter CSVs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::ReportMatrix;
use crate::io::create_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Scatter,
    All,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "scatter" => Ok(Format::Scatter),
            "all" => Ok(Format::All),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

pub fn to_json(report: &ReportMatrix) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ReportMatrix> {
    Ok(serde_json::from_str(text)?)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One row per cell and per full-ranking entry, after a header.
pub fn write_long_csv<W: Write>(report: &ReportMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scorer", "sampler", "seed", "metric", "k", "value", "count"])?;
    for c in &report.cells {
        w.write_record([
            c.scorer.clone(),
            c.sampler.as_str().into(),
            c.seed.to_string(),
            c.metric.base().into(),
            opt(c.metric.k()),
            opt(c.value),
            c.count.to_string(),
        ])?;
    }
    for e in &report.full {
        w.write_record([
            e.scorer.clone(),
            "full".into(),
            String::new(),
            e.metric.base().into(),
            opt(e.metric.k()),
            e.value.to_string(),
            e.count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Scatter rows for one scorer: `scorer,group,full_value,sampled_value`.
pub fn write_scatter_csv<W: Write>(report: &ReportMatrix, scorer: &str, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scorer", "group", "full_value", "sampled_value"])?;
    for p in report.scatter.iter().filter(|p| p.scorer == scorer) {
        w.write_record([
            p.scorer.clone(),
            p.group.clone(),
            p.full_value.to_string(),
            p.sampled_value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Writes the requested artefacts into `dir` and returns their paths.
pub fn emit_report(report: &ReportMatrix, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if matches!(format, Format::Json | Format::All) {
        let path = dir.join("report.json");
        std::fs::write(&path, to_json(report)?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    if matches!(format, Format::Csv | Format::All) {
        let path = dir.join("report.csv");
        write_long_csv(report, create_file(&path)?)?;
        written.push(path);
    }
    if matches!(format, Format::Scatter | Format::All) {
        for scorer in report.scorers() {
            if !report.scatter.iter().any(|p| p.scorer == scorer) {
                continue;
            }
            let path = dir.join(format!("scatter_{scorer}.csv"));
            write_scatter_csv(report, &scorer, create_file(&path)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
