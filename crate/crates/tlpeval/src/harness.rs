//! Experiment matrix: scorers × samplers × seeds × metrics over one
//! chronological test sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tlpeval_core::generator::{self, GenConfig};
use tlpeval_core::graph::{build_queries, chronological_split, surprise_index};
use tlpeval_core::metrics::{full_rank, rank_metrics, sampled_rank, RankSource};
use tlpeval_core::sampling::{shared_fixed_sample, InductiveTracker, SamplingContext};
use tlpeval_core::stats::{mean, simpson_check, spearman, SimpsonReport};
use tlpeval_core::{
    CandidateSet, CollisionMode, FilterMode, Query, RankRecord, SamplerConfig, ScorerKind, ScorerState, Strategy,
    TemporalEdge, TieMode,
};

use crate::error::{Error, Result};
use crate::io::{self, CsvSchema, ExternalScores, LabeledDataset};

/// Where the edge stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
    },
    Generated {
        config: GenConfig,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Csv { path, schema } => {
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let name = path
                    .file_stem()
                    .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
                io::ingest_csv(std::io::BufReader::new(file), schema, &name)
            }
            DatasetSource::Generated { config } => {
                Ok(LabeledDataset::with_numeric_labels(generator::generate(config)?))
            }
        }
    }
}

/// A sampled-side metric; each has a full-ranking counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    SampledMrr,
    SampledHits(usize),
    MrHat,
    AucHat,
}

/// Full-ranking metrics reported once per scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FullMetric {
    Mrr,
    Hits(usize),
    MeanRank,
    Auc,
}

impl Metric {
    pub fn full(self) -> FullMetric {
        match self {
            Metric::SampledMrr => FullMetric::Mrr,
            Metric::SampledHits(k) => FullMetric::Hits(k),
            Metric::MrHat => FullMetric::MeanRank,
            Metric::AucHat => FullMetric::Auc,
        }
    }

    /// Base name without the cutoff.
    pub fn base(self) -> &'static str {
        match self {
            Metric::SampledMrr => "sampled-mrr",
            Metric::SampledHits(_) => "sampled-hits",
            Metric::MrHat => "mr-hat",
            Metric::AucHat => "auc-hat",
        }
    }

    pub fn k(self) -> Option<usize> {
        match self {
            Metric::SampledHits(k) => Some(k),
            _ => None,
        }
    }

    fn is_estimator(self) -> bool {
        matches!(self, Metric::MrHat | Metric::AucHat)
    }

    pub fn defaults(ks: &[usize]) -> Vec<Metric> {
        let mut out = vec![Metric::SampledMrr];
        out.extend(ks.iter().map(|&k| Metric::SampledHits(k)));
        out.extend([Metric::MrHat, Metric::AucHat]);
        out
    }
}

impl FullMetric {
    pub fn base(self) -> &'static str {
        match self {
            FullMetric::Mrr => "full-mrr",
            FullMetric::Hits(_) => "full-hits",
            FullMetric::MeanRank => "full-mean-rank",
            FullMetric::Auc => "full-auc",
        }
    }

    pub fn k(self) -> Option<usize> {
        match self {
            FullMetric::Hits(k) => Some(k),
            _ => None,
        }
    }

    fn is_estimator(self) -> bool {
        matches!(self, FullMetric::MeanRank | FullMetric::Auc)
    }
}

fn fmt_metric(f: &mut fmt::Formatter<'_>, base: &str, k: Option<usize>) -> fmt::Result {
    match k {
        Some(k) => write!(f, "{base}@{k}"),
        None => f.write_str(base),
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_metric(f, self.base(), self.k())
    }
}

impl fmt::Display for FullMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_metric(f, self.base(), self.k())
    }
}

fn parse_k(s: &str) -> Option<usize> {
    s.parse().ok().filter(|&k| k > 0)
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown metric `{s}`"));
        match s {
            "sampled-mrr" | "mrr" => Ok(Metric::SampledMrr),
            "mr-hat" => Ok(Metric::MrHat),
            "auc-hat" => Ok(Metric::AucHat),
            _ => {
                let k = s
                    .strip_prefix("sampled-hits@")
                    .or_else(|| s.strip_prefix("hits@"))
                    .ok_or_else(bad)?;
                parse_k(k).map(Metric::SampledHits).ok_or_else(bad)
            }
        }
    }
}

impl FromStr for FullMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown full metric `{s}`"));
        match s {
            "full-mrr" => Ok(FullMetric::Mrr),
            "full-mean-rank" => Ok(FullMetric::MeanRank),
            "full-auc" => Ok(FullMetric::Auc),
            _ => s
                .strip_prefix("full-hits@")
                .and_then(parse_k)
                .map(FullMetric::Hits)
                .ok_or_else(bad),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Metric);
string_serde!(FullMetric);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Scorer state absorbs each test timestamp once it is in the past.
    #[default]
    Prequential,
    /// Scorer state stays at the end of the validation split.
    Frozen,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prequential" => Ok(Protocol::Prequential),
            "frozen" => Ok(Protocol::Frozen),
            _ => Err(Error::Config(format!("unknown protocol `{s}`"))),
        }
    }
}

/// How scatter points are formed for each scorer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ScatterGrouping {
    /// One point per seed over the whole test split.
    #[default]
    PerSeed,
    /// One point per seed and contiguous slice of test queries.
    TimeSlices { count: usize },
}

/// An externally produced score file evaluated as one more scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSource>,
    pub split: [f64; 3],
    pub scorers: Vec<ScorerKind>,
    pub samplers: Vec<Strategy>,
    pub n_s: usize,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Empty means sampled MRR, Hits@K for every K, mr-hat and auc-hat.
    pub metrics: Vec<Metric>,
    pub tie_mode: TieMode,
    /// Filtering for MRR and Hits@K, sampled and full.
    pub filter_mode: FilterMode,
    /// Filtering for mr-hat, auc-hat and their full counterparts.
    pub estimator_filter_mode: FilterMode,
    /// Whether samplers exclude filter-set members from their pools.
    pub sampler_collision_mode: CollisionMode,
    pub pad_with_uniform: bool,
    pub protocol: Protocol,
    pub scatter: ScatterGrouping,
    /// Sampler whose MRR feeds the scatter points; defaults to the first listed.
    pub scatter_sampler: Option<Strategy>,
    pub external: Option<ExternalSpec>,
    /// Skip full ranking for the external scorer. The shipped heuristics
    /// are always ranked against the full universe.
    pub skip_full_rank: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            split: [0.7, 0.15, 0.15],
            scorers: ScorerKind::ALL.to_vec(),
            samplers: vec![Strategy::Uniform],
            n_s: 20,
            ks: vec![1, 10],
            seeds: vec![0],
            metrics: Vec::new(),
            tie_mode: TieMode::Mean,
            filter_mode: FilterMode::Filtered,
            estimator_filter_mode: FilterMode::Raw,
            sampler_collision_mode: CollisionMode::Raw,
            pad_with_uniform: true,
            protocol: Protocol::Prequential,
            scatter: ScatterGrouping::PerSeed,
            scatter_sampler: None,
            external: None,
            skip_full_rank: false,
        }
    }
}

/// Generator settings for the shipped demo: a mixed-repetition stream.
pub fn demo_gen_config() -> GenConfig {
    GenConfig {
        num_nodes: 1000,
        num_edges: 20_000,
        repeat_prob: 0.4,
        horizon: 20_000,
        seed: 42,
        ..GenConfig::default()
    }
}

impl ExperimentConfig {
    /// The shipped demo suite: every heuristic and sampler over three seeds.
    pub fn demo() -> Self {
        Self {
            dataset: Some(DatasetSource::Generated {
                config: demo_gen_config(),
            }),
            samplers: Strategy::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            ..Self::default()
        }
    }

    pub fn resolved_metrics(&self) -> Vec<Metric> {
        if self.metrics.is_empty() {
            Metric::defaults(&self.ks)
        } else {
            self.metrics.clone()
        }
    }

    fn split_tuple(&self) -> (f64, f64, f64) {
        (self.split[0], self.split[1], self.split[2])
    }

    fn sampler_config(&self, strategy: Strategy, seed: u64) -> SamplerConfig {
        SamplerConfig::new(strategy, self.n_s, seed)
            .with_padding(self.pad_with_uniform)
            .with_collision_mode(self.sampler_collision_mode)
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.scorers.is_empty() && self.external.is_none() {
            return fail("no scorers selected");
        }
        if self.skip_full_rank && self.external.is_none() {
            return fail("skip-full-rank only applies to an external scorer");
        }
        if self.samplers.is_empty() {
            return fail("no samplers selected");
        }
        if self.seeds.is_empty() {
            return fail("no seeds given");
        }
        if self.ks.contains(&0) || self.resolved_metrics().iter().any(|m| m.k() == Some(0)) {
            return fail("hits cutoffs must be positive");
        }
        if let ScatterGrouping::TimeSlices { count: 0 } = self.scatter {
            return fail("time-slice count must be positive");
        }
        if let Some(s) = self.scatter_sampler {
            if !self.samplers.contains(&s) {
                return fail("scatter sampler is not among the selected samplers");
            }
        }
        let mut samplers = self.samplers.clone();
        samplers.sort();
        samplers.dedup();
        if samplers.len() != self.samplers.len() {
            return fail("duplicate sampler");
        }
        let mut scorers = self.scorers.clone();
        scorers.sort();
        scorers.dedup();
        if scorers.len() != self.scorers.len() {
            return fail("duplicate scorer");
        }
        for &s in &self.samplers {
            self.sampler_config(s, 0).validate(num_nodes)?;
        }
        Ok(())
    }
}

/// One `(scorer, sampler, seed, metric)` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub scorer: String,
    pub sampler: Strategy,
    pub seed: u64,
    pub metric: Metric,
    /// `None` when no query kept a non-empty candidate set.
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullEntry {
    pub scorer: String,
    pub metric: FullMetric,
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub scorer: String,
    /// Scorer family used for the Simpson check (`local`, `global`, `external`).
    pub group: String,
    pub sampler: Strategy,
    pub seed: u64,
    pub slice: Option<usize>,
    pub full_value: f64,
    pub sampled_value: f64,
}

/// Spearman correlation of per-scorer values between two rankings sources.
/// `b` is a sampler name, `a` a sampler name or `full`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub metric: Metric,
    pub a: String,
    pub b: String,
    pub rho: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub train_edges: usize,
    pub val_edges: usize,
    pub test_edges: usize,
    pub surprise_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub queries: usize,
    pub queries_with_filter: usize,
    pub mean_filter_size: f64,
}

/// Sampling side effects for one sampler and seed, summed over the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub sampler: Strategy,
    pub seed: u64,
    /// Whether `mr-hat`/`auc-hat` are unbiased under this sampler.
    pub estimator_valid: bool,
    pub padded_queries: usize,
    pub padded_candidates: usize,
    pub collisions: usize,
    pub empty_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetStats,
    pub filter: FilterStats,
    pub samplers: Vec<SamplerStats>,
    pub watermark: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMatrix {
    pub metadata: Metadata,
    pub cells: Vec<Cell>,
    pub full: Vec<FullEntry>,
    pub scatter: Vec<ScatterPoint>,
    pub correlations: Vec<Correlation>,
    pub simpson: Option<SimpsonReport>,
    pub simpson_note: Option<String>,
}

pub const SAMPLED_ONLY_WATERMARK: &str = "SAMPLED-ONLY: no ground-truth ranks";

impl ReportMatrix {
    pub fn cell(&self, scorer: &str, sampler: Strategy, seed: u64, metric: Metric) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.scorer == scorer && c.sampler == sampler && c.seed == seed && c.metric == metric)
    }

    pub fn full_entry(&self, scorer: &str, metric: FullMetric) -> Option<&FullEntry> {
        self.full.iter().find(|e| e.scorer == scorer && e.metric == metric)
    }

    pub fn correlation(&self, metric: Metric, a: &str, b: &str) -> Option<&Correlation> {
        self.correlations
            .iter()
            .find(|c| c.metric == metric && c.a == a && c.b == b)
    }

    /// Scorer names in report order.
    pub fn scorers(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.scorer) {
                out.push(c.scorer.clone());
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Scorer<'a> {
    Heuristic(ScorerKind),
    External(&'a str, &'a ExternalScores),
}

impl Scorer<'_> {
    fn name(&self) -> String {
        match self {
            Scorer::Heuristic(k) => k.as_str().into(),
            Scorer::External(name, _) => (*name).into(),
        }
    }

    fn group(&self) -> String {
        match self {
            Scorer::Heuristic(k) => match k.scale {
                tlpeval_core::Scale::Local => "local".into(),
                tlpeval_core::Scale::Global => "global".into(),
            },
            Scorer::External(..) => "external".into(),
        }
    }
}

/// Everything the sweep shares across scorers.
struct Plan<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a LabeledDataset,
    history: &'a [TemporalEdge],
    test: &'a [TemporalEdge],
    queries: Vec<Query>,
    ctx: SamplingContext,
    /// `shared[sampler][seed]` for the shared-fixed strategy.
    shared: Vec<Vec<Option<CandidateSet>>>,
    /// Distinct filter modes in use: index 0 ranking metrics, 1 estimators.
    modes: [FilterMode; 2],
}

/// Records for one scorer. `sampled[sampler][seed][family][query]`.
struct Sweep {
    full: [Vec<RankRecord>; 2],
    sampled: Vec<Vec<[Vec<Option<RankRecord>>; 2]>>,
    stats: Vec<Vec<SamplerStats>>,
}

fn family(estimator: bool) -> usize {
    usize::from(estimator)
}

fn sampled_record(
    target: f64,
    set: &CandidateSet,
    q: &Query,
    mode: FilterMode,
    tie: TieMode,
    num_nodes: usize,
    score: &mut impl FnMut(tlpeval_core::NodeId) -> Result<f64>,
) -> Result<Option<RankRecord>> {
    let pool_filtered = set.collision_mode == CollisionMode::Filtered;
    let filtered = mode == FilterMode::Filtered || pool_filtered;
    let mut scores = Vec::with_capacity(set.candidates.len());
    for &c in &set.candidates {
        if mode == FilterMode::Filtered && !pool_filtered && q.filter_set.binary_search(&c).is_ok() {
            continue;
        }
        scores.push(score(c)?);
    }
    if scores.is_empty() {
        return Ok(None);
    }
    let universe = num_nodes - 1 - if filtered { q.filter_set.len() } else { 0 };
    let mut rec = sampled_rank(target, &scores, tie, universe)?;
    rec.filter_mode = if filtered { FilterMode::Filtered } else { FilterMode::Raw };
    rec.filter_count = q.filter_set.len();
    Ok(Some(rec))
}

impl<'a> Plan<'a> {
    fn new(cfg: &'a ExperimentConfig, data: &'a LabeledDataset, splits: &tlpeval_core::Splits) -> Result<Self> {
        let ds = &data.dataset;
        let train = ds.slice(splits.train.clone())?;
        let ctx = SamplingContext::from_train(train, ds.num_nodes());
        let shared = cfg
            .samplers
            .iter()
            .map(|&s| {
                cfg.seeds
                    .iter()
                    .map(|&seed| {
                        if s == Strategy::SharedFixed {
                            shared_fixed_sample(ds.num_nodes(), &cfg.sampler_config(s, seed)).map(Some)
                        } else {
                            Ok(None)
                        }
                    })
                    .collect::<tlpeval_core::Result<Vec<_>>>()
            })
            .collect::<tlpeval_core::Result<Vec<_>>>()?;
        Ok(Self {
            cfg,
            data,
            history: ds.slice(splits.history())?,
            test: ds.slice(splits.test.clone())?,
            queries: build_queries(ds, splits.test.clone())?,
            ctx,
            shared,
            modes: [cfg.filter_mode, cfg.estimator_filter_mode],
        })
    }

    fn cell_error(&self, scorer: &Scorer<'_>, sampler: &str, seed: Option<u64>, e: Error) -> Error {
        Error::Cell {
            scorer: scorer.name(),
            sampler: sampler.into(),
            seed: seed.map_or_else(|| "-".into(), |s| s.to_string()),
            source: Box::new(e),
        }
    }

    fn sweep(&self, scorer: Scorer<'_>) -> Result<Sweep> {
        let cfg = self.cfg;
        let num_nodes = self.data.dataset.num_nodes();
        let nq = self.queries.len();
        let mut state = match scorer {
            Scorer::Heuristic(kind) => Some(ScorerState::fit(self.history, kind)?),
            Scorer::External(..) => None,
        };
        let mut tracker = InductiveTracker::new();
        let mut pending = 0usize;
        let mut buf = vec![0.0; num_nodes];
        let mut full: [Vec<RankRecord>; 2] = [Vec::with_capacity(nq), Vec::with_capacity(nq)];
        let mut sampled: Vec<Vec<[Vec<Option<RankRecord>>; 2]>> = cfg
            .samplers
            .iter()
            .map(|_| {
                cfg.seeds
                    .iter()
                    .map(|_| [Vec::with_capacity(nq), Vec::with_capacity(nq)])
                    .collect()
            })
            .collect();
        let mut stats: Vec<Vec<SamplerStats>> = cfg
            .samplers
            .iter()
            .map(|&s| {
                cfg.seeds
                    .iter()
                    .map(|&seed| SamplerStats {
                        sampler: s,
                        seed,
                        estimator_valid: s.is_uniform(),
                        padded_queries: 0,
                        padded_candidates: 0,
                        collisions: 0,
                        empty_sets: 0,
                    })
                    .collect()
            })
            .collect();
        let configs: Vec<Vec<SamplerConfig>> = cfg
            .samplers
            .iter()
            .map(|&s| cfg.seeds.iter().map(|&seed| cfg.sampler_config(s, seed)).collect())
            .collect();

        for (ordinal, q) in self.queries.iter().enumerate() {
            // absorb test edges strictly before this query's timestamp
            while pending < self.test.len() && self.test[pending].t < q.t {
                if cfg.protocol == Protocol::Prequential {
                    if let Some(st) = state.as_mut() {
                        st.update(&self.test[pending])?;
                    }
                }
                tracker.push(&self.test[pending]);
                pending += 1;
            }
            let test_so_far = tracker.advance_to(q.t);

            let ext_score = |node: tlpeval_core::NodeId| -> Result<f64> {
                match scorer {
                    Scorer::External(_, ext) => ext.get(ordinal, node).ok_or_else(|| {
                        Error::Config(format!(
                            "external scores missing query {ordinal}, candidate `{}`",
                            self.data.labels[node as usize]
                        ))
                    }),
                    Scorer::Heuristic(_) => unreachable!(),
                }
            };
            let have_full = state.is_some() || !cfg.skip_full_rank;
            match (&state, have_full) {
                (Some(st), _) => st.score_into(q.src, &mut buf),
                (None, true) => {
                    for (node, slot) in buf.iter_mut().enumerate() {
                        *slot = ext_score(node as tlpeval_core::NodeId)
                            .map_err(|e| self.cell_error(&scorer, "full", None, e))?;
                    }
                }
                (None, false) => {}
            }
            if have_full {
                for (fam, &mode) in self.modes.iter().enumerate() {
                    full[fam].push(full_rank(&buf, q.true_dst, &q.filter_set, cfg.tie_mode, mode));
                }
            }
            let mut score = |node: tlpeval_core::NodeId| -> Result<f64> {
                if state.is_some() || have_full {
                    Ok(buf[node as usize])
                } else {
                    ext_score(node)
                }
            };
            let target = score(q.true_dst).map_err(|e| self.cell_error(&scorer, "target", None, e))?;

            for (si, &strategy) in cfg.samplers.iter().enumerate() {
                for (ki, &seed) in cfg.seeds.iter().enumerate() {
                    let wrap = |e: Error| self.cell_error(&scorer, strategy.as_str(), Some(seed), e);
                    let set = self
                        .ctx
                        .sample(q, &configs[si][ki], test_so_far, self.shared[si][ki].as_ref())
                        .map_err(|e| wrap(e.into()))?;
                    let st = &mut stats[si][ki];
                    st.padded_queries += usize::from(set.padded > 0);
                    st.padded_candidates += set.padded;
                    st.collisions += set.collisions;
                    st.empty_sets += usize::from(set.candidates.is_empty());
                    for (fam, &mode) in self.modes.iter().enumerate() {
                        let rec = sampled_record(target, &set, q, mode, cfg.tie_mode, num_nodes, &mut score)
                            .map_err(wrap)?;
                        sampled[si][ki][fam].push(rec);
                    }
                }
            }
        }
        Ok(Sweep { full, sampled, stats })
    }
}

fn summary_value(records: &[RankRecord], metric_ks: &[usize], which: RankSource, pick: Pick) -> Result<f64> {
    let s = rank_metrics(records, metric_ks, which)?;
    Ok(match pick {
        Pick::Mrr => s.mrr,
        Pick::Hits(k) => s.hits[&k],
        Pick::MrHat => s.mr_hat,
        Pick::Auc => s.auc_hat,
    })
}

#[derive(Clone, Copy)]
enum Pick {
    Mrr,
    Hits(usize),
    MrHat,
    Auc,
}

fn pick_sampled(m: Metric) -> Pick {
    match m {
        Metric::SampledMrr => Pick::Mrr,
        Metric::SampledHits(k) => Pick::Hits(k),
        Metric::MrHat => Pick::MrHat,
        Metric::AucHat => Pick::Auc,
    }
}

fn pick_full(m: FullMetric) -> Pick {
    match m {
        FullMetric::Mrr => Pick::Mrr,
        FullMetric::Hits(k) => Pick::Hits(k),
        FullMetric::MeanRank => Pick::MrHat,
        FullMetric::Auc => Pick::Auc,
    }
}

fn scorer_list<'a>(cfg: &'a ExperimentConfig, external: Option<&'a ExternalScores>) -> Result<Vec<Scorer<'a>>> {
    let mut out: Vec<Scorer<'a>> = cfg.scorers.iter().map(|&k| Scorer::Heuristic(k)).collect();
    match (&cfg.external, external) {
        (Some(spec), Some(scores)) => out.push(Scorer::External(&spec.name, scores)),
        (Some(spec), None) => {
            return Err(Error::Config(format!("external scorer `{}` configured but no scores loaded", spec.name)))
        }
        (None, Some(_)) => return Err(Error::Config("scores given without an external scorer entry".into())),
        (None, None) => {}
    }
    Ok(out)
}

/// Runs the whole matrix. `jobs` bounds the worker threads; the result is
/// identical for every value.
pub fn run_matrix(
    cfg: &ExperimentConfig,
    data: &LabeledDataset,
    external: Option<&ExternalScores>,
    jobs: usize,
) -> Result<ReportMatrix> {
    let ds = &data.dataset;
    cfg.validate(ds.num_nodes())?;
    let splits = chronological_split(ds, cfg.split_tuple())?;
    let plan = Plan::new(cfg, data, &splits)?;
    let scorers = scorer_list(cfg, external)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let sweeps: Vec<Sweep> = pool.install(|| {
        scorers
            .par_iter()
            .map(|&s| plan.sweep(s))
            .collect::<Result<Vec<_>>>()
    })?;

    let metrics = cfg.resolved_metrics();
    let mut metric_ks: Vec<usize> = metrics.iter().filter_map(|m| m.k()).collect();
    metric_ks.sort_unstable();
    metric_ks.dedup();

    let mut cells = Vec::new();
    let mut full = Vec::new();
    let mut full_metrics: Vec<FullMetric> = Vec::new();
    for m in &metrics {
        if !full_metrics.contains(&m.full()) {
            full_metrics.push(m.full());
        }
    }
    for (scorer, sweep) in scorers.iter().zip(&sweeps) {
        let name = scorer.name();
        if !sweep.full[0].is_empty() {
            for &fm in &full_metrics {
                let recs = &sweep.full[family(fm.is_estimator())];
                let value = summary_value(recs, &metric_ks, RankSource::Full, pick_full(fm))?;
                full.push(FullEntry {
                    scorer: name.clone(),
                    metric: fm,
                    value,
                    count: recs.len(),
                });
            }
        }
        for (si, &sampler) in cfg.samplers.iter().enumerate() {
            for (ki, &seed) in cfg.seeds.iter().enumerate() {
                for &m in &metrics {
                    let recs: Vec<RankRecord> = sweep.sampled[si][ki][family(m.is_estimator())]
                        .iter()
                        .flatten()
                        .copied()
                        .collect();
                    let value = if recs.is_empty() {
                        None
                    } else {
                        Some(
                            summary_value(&recs, &metric_ks, RankSource::Sampled, pick_sampled(m)).map_err(|e| {
                                Error::Cell {
                                    scorer: name.clone(),
                                    sampler: sampler.as_str().into(),
                                    seed: seed.to_string(),
                                    source: Box::new(e),
                                }
                            })?,
                        )
                    };
                    cells.push(Cell {
                        scorer: name.clone(),
                        sampler,
                        seed,
                        metric: m,
                        value,
                        count: recs.len(),
                    });
                }
            }
        }
    }

    let scatter = scatter_points(cfg, &scorers, &sweeps)?;
    let correlations = correlations(cfg, &metrics, &scorers, &cells, &full);
    let (simpson, simpson_note) = simpson_from_scatter(&scatter);

    let with_filter = plan.queries.iter().filter(|q| !q.filter_set.is_empty()).count();
    let metadata = Metadata {
        version: crate::VERSION.into(),
        config: cfg.clone(),
        dataset: DatasetStats {
            name: ds.name().into(),
            num_nodes: ds.num_nodes(),
            num_edges: ds.len(),
            train_edges: splits.train.len(),
            val_edges: splits.val.len(),
            test_edges: splits.test.len(),
            surprise_index: surprise_index(ds, &splits)?,
        },
        filter: FilterStats {
            queries: plan.queries.len(),
            queries_with_filter: with_filter,
            mean_filter_size: mean(plan.queries.iter().map(|q| q.filter_set.len() as f64)).unwrap_or(0.0),
        },
        samplers: sweeps
            .first()
            .map(|s| s.stats.iter().flatten().cloned().collect())
            .unwrap_or_default(),
        watermark: match (&cfg.external, cfg.skip_full_rank) {
            (Some(spec), true) => Some(format!("{SAMPLED_ONLY_WATERMARK} (scorer `{}`)", spec.name)),
            _ => None,
        },
    };
    Ok(ReportMatrix {
        metadata,
        cells,
        full,
        scatter,
        correlations,
        simpson,
        simpson_note,
    })
}

fn scatter_points(cfg: &ExperimentConfig, scorers: &[Scorer<'_>], sweeps: &[Sweep]) -> Result<Vec<ScatterPoint>> {
    let sampler = cfg.scatter_sampler.unwrap_or(cfg.samplers[0]);
    let si = cfg.samplers.iter().position(|&s| s == sampler).unwrap_or(0);
    let fam = family(false);
    let mut out = Vec::new();
    for (scorer, sweep) in scorers.iter().zip(sweeps) {
        if sweep.full[fam].is_empty() {
            continue;
        }
        let nq = sweep.full[fam].len();
        let slices: Vec<(Option<usize>, std::ops::Range<usize>)> = match cfg.scatter {
            ScatterGrouping::PerSeed => vec![(None, 0..nq)],
            ScatterGrouping::TimeSlices { count } => (0..count)
                .map(|s| (Some(s), s * nq / count..(s + 1) * nq / count))
                .filter(|(_, r)| !r.is_empty())
                .collect(),
        };
        for (ki, &seed) in cfg.seeds.iter().enumerate() {
            for (slice, range) in &slices {
                let full_recs = &sweep.full[fam][range.clone()];
                let samp: Vec<RankRecord> = sweep.sampled[si][ki][fam][range.clone()]
                    .iter()
                    .flatten()
                    .copied()
                    .collect();
                if samp.is_empty() {
                    continue;
                }
                out.push(ScatterPoint {
                    scorer: scorer.name(),
                    group: scorer.group(),
                    sampler,
                    seed,
                    slice: *slice,
                    full_value: rank_metrics(full_recs, &[], RankSource::Full)?.mrr,
                    sampled_value: rank_metrics(&samp, &[], RankSource::Sampled)?.mrr,
                });
            }
        }
    }
    Ok(out)
}

fn correlations(
    cfg: &ExperimentConfig,
    metrics: &[Metric],
    scorers: &[Scorer<'_>],
    cells: &[Cell],
    full: &[FullEntry],
) -> Vec<Correlation> {
    let names: Vec<String> = scorers.iter().map(|s| s.name()).collect();
    let mut out = Vec::new();
    for &m in metrics {
        // per-scorer mean over seeds, one vector per sampler
        let per_sampler: Vec<(String, Option<Vec<f64>>)> = cfg
            .samplers
            .iter()
            .map(|&s| {
                let v: Option<Vec<f64>> = names
                    .iter()
                    .map(|n| {
                        let vals: Option<Vec<f64>> = cells
                            .iter()
                            .filter(|c| &c.scorer == n && c.sampler == s && c.metric == m)
                            .map(|c| c.value)
                            .collect();
                        vals.and_then(mean)
                    })
                    .collect();
                (s.as_str().to_string(), v)
            })
            .collect();
        let mut sources = Vec::new();
        {
            let v: Option<Vec<f64>> = names
                .iter()
                .map(|n| full.iter().find(|e| &e.scorer == n && e.metric == m.full()).map(|e| e.value))
                .collect();
            sources.push(("full".to_string(), v));
        }
        sources.extend(per_sampler);
        for i in 0..sources.len() {
            for j in i + 1..sources.len() {
                let (rho, note) = match (&sources[i].1, &sources[j].1) {
                    (Some(a), Some(b)) => match spearman(a, b) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    },
                    _ => (None, Some("undefined cell value".to_string())),
                };
                out.push(Correlation {
                    metric: m,
                    a: sources[i].0.clone(),
                    b: sources[j].0.clone(),
                    rho,
                    note,
                });
            }
        }
    }
    out
}

/// Groups scatter points by scorer family and runs the Simpson check.
pub fn simpson_from_scatter(points: &[ScatterPoint]) -> (Option<SimpsonReport>, Option<String>) {
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        groups
            .entry(p.group.clone())
            .or_default()
            .push((p.full_value, p.sampled_value));
    }
    let groups: Vec<(String, Vec<(f64, f64)>)> = groups.into_iter().collect();
    match simpson_check(&groups) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    }
}
