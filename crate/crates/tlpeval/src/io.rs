//! CSV ingestion and export, external score files and the flat
//! `key=value` config format.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use tlpeval_core::generator::GenConfig;
use tlpeval_core::{CandidateSet, Dataset, NodeId, Timestamp};

use crate::error::{Error, Result};

/// Column names and timestamp handling for an edge CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub src_col: String,
    pub dst_col: String,
    pub time_col: String,
    /// Multiplier applied to decimal timestamps before rounding to ticks.
    /// Without it every timestamp must be a non-negative integer.
    pub time_scale: Option<f64>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            src_col: "src".into(),
            dst_col: "dst".into(),
            time_col: "time".into(),
            time_scale: None,
        }
    }
}

/// A dataset together with the original node labels, `labels[id]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub labels: Vec<String>,
}

impl LabeledDataset {
    /// Labels a dataset with its own decimal node ids.
    pub fn with_numeric_labels(dataset: Dataset) -> Self {
        let labels = (0..dataset.num_nodes()).map(|i| i.to_string()).collect();
        Self { dataset, labels }
    }

    pub fn label_index(&self) -> HashMap<&str, NodeId> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as NodeId))
            .collect()
    }
}

fn parse_time(raw: &str, scale: Option<f64>, line: u64) -> Result<Timestamp> {
    if let Ok(t) = raw.parse::<Timestamp>() {
        return match scale {
            Some(s) => scaled(t as f64, s, raw, line),
            None => Ok(t),
        };
    }
    let bad = |message: String| Error::Parse { line, message };
    match scale {
        None => Err(bad(format!(
            "timestamp `{raw}` is not a non-negative integer (set a time scale for decimal input)"
        ))),
        Some(s) => {
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("timestamp `{raw}` is not a number")))?;
            scaled(v, s, raw, line)
        }
    }
}

fn scaled(v: f64, scale: f64, raw: &str, line: u64) -> Result<Timestamp> {
    let ticks = (v * scale).round();
    if !ticks.is_finite() || ticks < 0.0 || ticks > u64::MAX as f64 {
        return Err(Error::Parse {
            line,
            message: format!("timestamp `{raw}` scales outside the tick range"),
        });
    }
    Ok(ticks as Timestamp)
}

/// Reads an edge CSV with a header row. Node labels are arbitrary strings
/// and get dense ids in order of first appearance (source before
/// destination within a row).
pub fn ingest_csv<R: Read>(reader: R, schema: &CsvSchema, name: &str) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |want: &str| {
        headers
            .iter()
            .position(|h| h == want)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{want}` in header {:?}", headers.iter().collect::<Vec<_>>()),
            })
    };
    let (si, di, ti) = (column(&schema.src_col)?, column(&schema.dst_col)?, column(&schema.time_col)?);

    let mut ids: HashMap<String, NodeId> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut intern = |label: &str, line: u64| -> Result<NodeId> {
        if label.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty node label".into(),
            });
        }
        if let Some(&id) = ids.get(label) {
            return Ok(id);
        }
        let id = NodeId::try_from(labels.len()).map_err(|_| Error::Parse {
            line,
            message: "too many distinct nodes".into(),
        })?;
        ids.insert(label.to_owned(), id);
        labels.push(label.to_owned());
        Ok(id)
    };

    let mut triples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("row has {} fields, expected at least {}", record.len(), i + 1),
            })
        };
        let src = intern(field(si)?, line)?;
        let dst = intern(field(di)?, line)?;
        let t = parse_time(field(ti)?, schema.time_scale, line)?;
        triples.push((src, dst, t));
    }
    if triples.is_empty() {
        return Err(tlpeval_core::Error::EmptyDataset.into());
    }
    let dataset = Dataset::new(name, labels.len(), triples)?;
    Ok(LabeledDataset { dataset, labels })
}

/// Writes the dataset as `src,dst,time` rows in stream order, using labels.
pub fn write_dataset_csv<W: Write>(data: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst", "time"])?;
    for e in data.dataset.edges() {
        w.write_record([
            data.labels[e.src as usize].as_str(),
            data.labels[e.dst as usize].as_str(),
            &e.t.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Long-format candidate export: one row per `(query, candidate)`.
pub struct CandidateWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CandidateWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["query_ordinal", "strategy", "seed", "candidate"])?;
        Ok(Self { inner })
    }

    pub fn write_set(&mut self, query_ordinal: usize, seed: u64, set: &CandidateSet, labels: &[String]) -> Result<()> {
        let (q, s) = (query_ordinal.to_string(), seed.to_string());
        for &c in &set.candidates {
            self.inner
                .write_record([q.as_str(), set.strategy.as_str(), s.as_str(), labels[c as usize].as_str()])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<csv output>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Config(format!("flushing candidate export: {}", e.error())))
    }
}

/// Scores from an external model, keyed by test-query ordinal and node id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    pub scores: HashMap<(usize, NodeId), f64>,
}

impl ExternalScores {
    pub fn get(&self, query_ordinal: usize, node: NodeId) -> Option<f64> {
        self.scores.get(&(query_ordinal, node)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Reads `query_ordinal,candidate,score` rows. Candidates are node labels
/// resolved through `labels`.
pub fn read_scores<R: Read>(reader: R, labels: &[String]) -> Result<ExternalScores> {
    let index: HashMap<&str, NodeId> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as NodeId))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |want: &str| {
        headers.iter().position(|h| h == want).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{want}`"),
        })
    };
    let (qi, ci, si) = (col("query_ordinal")?, col("candidate")?, col("score")?);
    let mut out = ExternalScores::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        let get = |i: usize| record.get(i).ok_or_else(|| bad("short row".into()));
        let q: usize = get(qi)?
            .parse()
            .map_err(|_| bad(format!("bad query ordinal `{}`", record.get(qi).unwrap_or(""))))?;
        let label = get(ci)?;
        let node = *index
            .get(label)
            .ok_or_else(|| bad(format!("unknown candidate `{label}`")))?;
        let score: f64 = get(si)?
            .parse()
            .map_err(|_| bad(format!("bad score `{}`", record.get(si).unwrap_or(""))))?;
        if score.is_nan() {
            return Err(bad("score is NaN".into()));
        }
        if out.scores.insert((q, node), score).is_some() {
            return Err(bad(format!("duplicate score for query {q}, candidate `{label}`")));
        }
    }
    Ok(out)
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim().replace('_', "-");
        if out.insert(key.clone(), v.trim().to_owned()).is_some() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Applies generator keys from a `key=value` map; unknown keys are errors.
pub fn gen_config_from_kv(map: &BTreeMap<String, String>) -> Result<GenConfig> {
    let mut cfg = GenConfig::default();
    for (k, v) in map {
        match k.as_str() {
            "num-nodes" => cfg.num_nodes = parse_value(k, v)?,
            "num-edges" => cfg.num_edges = parse_value(k, v)?,
            "source-exponent" => cfg.source_exponent = parse_value(k, v)?,
            "dst-exponent" => cfg.dst_exponent = parse_value(k, v)?,
            "repeat-prob" => cfg.repeat_prob = parse_value(k, v)?,
            "horizon" => cfg.horizon = parse_value(k, v)?,
            "seed" => cfg.seed = parse_value(k, v)?,
            "burst" => cfg.burst = parse_value(k, v)?,
            _ => return Err(Error::Config(format!("unknown generator key `{k}`"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a generator config given as JSON or as `key=value` lines.
pub fn parse_gen_config(text: &str) -> Result<GenConfig> {
    let cfg = if text.trim_start().starts_with('{') {
        serde_json::from_str::<GenConfig>(text)?
    } else {
        return gen_config_from_kv(&parse_kv(text)?);
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn gen_config_to_kv(cfg: &GenConfig) -> String {
    format!(
        "num_nodes = {}\nnum_edges = {}\nsource_exponent = {}\ndst_exponent = {}\nrepeat_prob = {}\nhorizon = {}\nseed = {}\nburst = {}\n",
        cfg.num_nodes,
        cfg.num_edges,
        cfg.source_exponent,
        cfg.dst_exponent,
        cfg.repeat_prob,
        cfg.horizon,
        cfg.seed,
        cfg.burst
    )
}

pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn create_file(path: &std::path::Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
