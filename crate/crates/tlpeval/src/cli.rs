//! Command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tlpeval_core::fixtures;
use tlpeval_core::generator::{self, GenConfig};
use tlpeval_core::graph::{build_queries, chronological_split, surprise_index};
use tlpeval_core::oracle::{ordering_flip_check, Order};
use tlpeval_core::sampling::{shared_fixed_sample, InductiveTracker, SamplingContext};
use tlpeval_core::stats::simpson_check;
use tlpeval_core::{SamplerConfig, Strategy};

use crate::error::{Error, Result};
use crate::harness::{self, DatasetSource, ExperimentConfig, ExternalSpec, Metric, Protocol, ScatterGrouping};
use crate::io::{self, CsvSchema, LabeledDataset};
use crate::report::{self, Format};

#[derive(Debug, Parser)]
#[command(name = "tlpeval", version, about = "Temporal link prediction evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read an edge CSV, validate it and write it back in stream order.
    Ingest(IngestArgs),
    /// Generate a synthetic temporal graph.
    Generate(GenerateArgs),
    /// Run the scorer × sampler × seed × metric matrix.
    Evaluate(Box<EvaluateArgs>),
    /// Correlation tables and Simpson check over one or more reports.
    Correlate(CorrelateArgs),
    /// Run the shipped Simpson's-paradox fixture.
    DemoParadox(DemoArgs),
    /// Run the shipped ordering-flip fixture through the exact oracle.
    DemoFlip(DemoArgs),
    /// Re-emit a saved JSON report in other formats.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CsvArgs {
    #[arg(long, default_value = "src")]
    pub src_col: String,
    #[arg(long, default_value = "dst")]
    pub dst_col: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    /// Multiply decimal timestamps by this factor and round to ticks.
    #[arg(long)]
    pub time_scale: Option<f64>,
}

impl CsvArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            src_col: self.src_col.clone(),
            dst_col: self.dst_col.clone(),
            time_col: self.time_col.clone(),
            time_scale: self.time_scale,
        }
    }

    fn overrides(&self, map: &mut BTreeMap<String, String>) {
        let defaults = CsvSchema::default();
        for (key, value, default) in [
            ("src-col", &self.src_col, &defaults.src_col),
            ("dst-col", &self.dst_col, &defaults.dst_col),
            ("time-col", &self.time_col, &defaults.time_col),
        ] {
            if value != default {
                map.insert(key.into(), value.clone());
            }
        }
        if let Some(s) = self.time_scale {
            map.insert("time-scale".into(), s.to_string());
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator settings as JSON or `key = value` lines.
    #[arg(long)]
    pub gen_config: Option<PathBuf>,
    #[arg(long, env = "TLPEVAL_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub num_nodes: Option<usize>,
    #[arg(long)]
    pub num_edges: Option<usize>,
    #[arg(long)]
    pub repeat_prob: Option<f64>,
    /// Search the repetition probability until the surprise index hits this value.
    #[arg(long)]
    pub calibrate_surprise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Experiment config as JSON or `key = value` lines; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the shipped mixed-repetition demo suite as the base config.
    #[arg(long)]
    pub demo: bool,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[arg(long)]
    pub gen_config: Option<PathBuf>,
    /// Comma-separated, e.g. `local-recency,global-popularity`.
    #[arg(long)]
    pub scorers: Option<String>,
    /// Comma-separated: uniform, historical, inductive, popularity, shared-fixed.
    #[arg(long)]
    pub samplers: Option<String>,
    #[arg(long)]
    pub n_s: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub metrics: Option<String>,
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub tie_mode: Option<String>,
    /// Filtering for MRR and Hits@K.
    #[arg(long)]
    pub filter_mode: Option<String>,
    /// Filtering for mr-hat and auc-hat.
    #[arg(long)]
    pub estimator_filter_mode: Option<String>,
    /// Whether samplers exclude same-timestamp true destinations.
    #[arg(long)]
    pub sampler_collision_mode: Option<String>,
    #[arg(long)]
    pub no_padding: bool,
    #[arg(long)]
    pub protocol: Option<String>,
    /// Scatter points per contiguous slice of test queries instead of per seed.
    #[arg(long)]
    pub time_slices: Option<String>,
    #[arg(long)]
    pub scatter_sampler: Option<String>,
    /// External scores, `query_ordinal,candidate,score`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value = "external")]
    pub scores_name: String,
    /// Skip full ranking; the report is watermarked as sampled-only.
    #[arg(long)]
    pub skip_full_rank: bool,
    /// Also write the test queries and every candidate set.
    #[arg(long)]
    pub export_candidates: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads, 0 for all cores. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// json, csv, scatter or all.
    #[arg(long, default_value = "all")]
    pub format: String,
    #[arg(long = "fallback-seed", env = "TLPEVAL_SEED", hide = true)]
    pub env_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// One or more JSON reports.
    #[arg(long = "report", required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Group scatter points by `family` (local/global) or `dataset`.
    #[arg(long, default_value = "family")]
    pub group_by: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    pub format: String,
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(*a),
        Command::Correlate(a) => correlate(a),
        Command::DemoParadox(a) => demo_paradox(a),
        Command::DemoFlip(a) => demo_flip(a),
        Command::Report(a) => reemit(a),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn describe(data: &LabeledDataset) -> String {
    let edges = data.dataset.edges();
    format!(
        "{}: {} nodes, {} edges, t in [{}, {}]",
        data.dataset.name(),
        data.dataset.num_nodes(),
        edges.len(),
        edges.first().map_or(0, |e| e.t),
        edges.last().map_or(0, |e| e.t)
    )
}

fn ingest(a: IngestArgs) -> Result<()> {
    let data = DatasetSource::Csv {
        path: a.dataset,
        schema: a.csv.schema(),
    }
    .load()?;
    create_dir(&a.out)?;
    let path = a.out.join("dataset.csv");
    io::write_dataset_csv(&data, io::create_file(&path)?)?;
    println!("{}", describe(&data));
    println!("wrote {}", path.display());
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut cfg = match &a.gen_config {
        Some(p) => io::parse_gen_config(&io::read_file(p)?)?,
        None => GenConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.num_nodes {
        cfg.num_nodes = n;
    }
    if let Some(m) = a.num_edges {
        cfg.num_edges = m;
    }
    if let Some(p) = a.repeat_prob {
        cfg.repeat_prob = p;
    }
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let split = (0.7, 0.15, 0.15);
    if let Some(target) = a.calibrate_surprise {
        cfg = generator::calibrate_surprise(&cfg, target, split)?;
    }
    let data = LabeledDataset::with_numeric_labels(generator::generate(&cfg)?);
    let splits = chronological_split(&data.dataset, split)?;
    let surprise = surprise_index(&data.dataset, &splits)?;
    create_dir(&a.out)?;
    let path = a.out.join("dataset.csv");
    io::write_dataset_csv(&data, io::create_file(&path)?)?;
    let cfg_path = a.out.join("gen_config.conf");
    std::fs::write(&cfg_path, io::gen_config_to_kv(&cfg)).map_err(|e| Error::io(&cfg_path, e))?;
    println!("{}", describe(&data));
    println!("repeat_prob = {}, surprise index = {surprise:.6}", cfg.repeat_prob);
    println!("wrote {} and {}", path.display(), cfg_path.display());
    Ok(())
}

fn split_list<T>(key: &str, value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("`{key}` is empty")));
    }
    Ok(items)
}

fn parse_as<T: std::str::FromStr>(key: &str) -> impl Fn(&str) -> Result<T> + '_
where
    T::Err: std::fmt::Display,
{
    move |s| {
        s.parse::<T>()
            .map_err(|e| Error::Config(format!("bad value `{s}` for `{key}`: {e}")))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let path = PathBuf::from(p);
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

/// Applies `key = value` settings. Relative paths resolve against `base`.
pub fn apply_settings(
    cfg: &mut ExperimentConfig,
    map: &BTreeMap<String, String>,
    base: Option<&Path>,
) -> Result<()> {
    let mut schema = match &cfg.dataset {
        Some(DatasetSource::Csv { schema, .. }) => schema.clone(),
        _ => CsvSchema::default(),
    };
    let mut schema_touched = false;
    if map.contains_key("dataset") && map.contains_key("gen-config") {
        return Err(Error::Config("give either `dataset` or `gen-config`, not both".into()));
    }
    for (k, v) in map {
        let k = k.as_str();
        match k {
            "dataset" => {
                cfg.dataset = Some(DatasetSource::Csv {
                    path: resolve(base, v),
                    schema: schema.clone(),
                })
            }
            "gen-config" => {
                let path = resolve(base, v);
                cfg.dataset = Some(DatasetSource::Generated {
                    config: io::parse_gen_config(&io::read_file(&path)?)?,
                });
            }
            "src-col" => (schema.src_col, schema_touched) = (v.clone(), true),
            "dst-col" => (schema.dst_col, schema_touched) = (v.clone(), true),
            "time-col" => (schema.time_col, schema_touched) = (v.clone(), true),
            "time-scale" => (schema.time_scale, schema_touched) = (Some(parse_as::<f64>(k)(v)?), true),
            "scorers" => cfg.scorers = split_list(k, v, parse_as(k))?,
            "samplers" => cfg.samplers = split_list(k, v, parse_as(k))?,
            "n-s" => cfg.n_s = parse_as(k)(v)?,
            "seeds" => cfg.seeds = split_list(k, v, parse_as(k))?,
            "ks" => cfg.ks = split_list(k, v, parse_as(k))?,
            "metrics" => cfg.metrics = split_list(k, v, |s| s.parse::<Metric>())?,
            "split" => {
                let parts: Vec<f64> = split_list(k, v, parse_as(k))?;
                cfg.split = parts
                    .try_into()
                    .map_err(|_| Error::Config("`split` needs three fractions".into()))?;
            }
            "tie-mode" => cfg.tie_mode = parse_as(k)(v)?,
            "filter-mode" => cfg.filter_mode = parse_as(k)(v)?,
            "estimator-filter-mode" => cfg.estimator_filter_mode = parse_as(k)(v)?,
            "sampler-collision-mode" => cfg.sampler_collision_mode = parse_as(k)(v)?,
            "padding" => cfg.pad_with_uniform = parse_bool(k, v)?,
            "protocol" => cfg.protocol = v.parse::<Protocol>()?,
            "time-slices" => {
                cfg.scatter = ScatterGrouping::TimeSlices {
                    count: parse_as(k)(v)?,
                }
            }
            "scatter-sampler" => cfg.scatter_sampler = Some(parse_as(k)(v)?),
            "scores" => {
                let name = map.get("scores-name").cloned().unwrap_or_else(|| "external".into());
                cfg.external = Some(ExternalSpec {
                    name,
                    path: resolve(base, v),
                });
            }
            "scores-name" => {}
            "skip-full-rank" => cfg.skip_full_rank = parse_bool(k, v)?,
            _ => return Err(Error::Config(format!("unknown setting `{k}`"))),
        }
    }
    if schema_touched {
        match &mut cfg.dataset {
            Some(DatasetSource::Csv { schema: s, .. }) => *s = schema,
            _ => return Err(Error::Config("CSV column settings given without a CSV dataset".into())),
        }
    }
    Ok(())
}

fn evaluate_overrides(a: &EvaluateArgs) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    put("dataset", a.dataset.as_ref().map(|p| p.display().to_string()));
    put("gen-config", a.gen_config.as_ref().map(|p| p.display().to_string()));
    put("scorers", a.scorers.clone());
    put("samplers", a.samplers.clone());
    put("n-s", a.n_s.clone());
    put("seeds", a.seeds.clone());
    put("ks", a.ks.clone());
    put("metrics", a.metrics.clone());
    put("split", a.split.clone());
    put("tie-mode", a.tie_mode.clone());
    put("filter-mode", a.filter_mode.clone());
    put("estimator-filter-mode", a.estimator_filter_mode.clone());
    put("sampler-collision-mode", a.sampler_collision_mode.clone());
    put("protocol", a.protocol.clone());
    put("time-slices", a.time_slices.clone());
    put("scatter-sampler", a.scatter_sampler.clone());
    put("scores", a.scores.as_ref().map(|p| p.display().to_string()));
    if a.scores.is_some() {
        put("scores-name", Some(a.scores_name.clone()));
    }
    if a.no_padding {
        put("padding", Some("false".into()));
    }
    if a.skip_full_rank {
        put("skip-full-rank", Some("true".into()));
    }
    a.csv.overrides(&mut map);
    map
}

/// Builds the experiment config from the file, the demo preset and flags,
/// in increasing precedence. `TLPEVAL_SEED` only fills in missing seeds.
pub fn build_config(a: &EvaluateArgs) -> Result<ExperimentConfig> {
    let mut cfg = if a.demo {
        ExperimentConfig::demo()
    } else {
        ExperimentConfig::default()
    };
    let mut seeds_given = a.demo || a.seeds.is_some();
    if let Some(path) = &a.config {
        let text = io::read_file(path)?;
        let base = path.parent();
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            seeds_given |= value.get("seeds").is_some();
            cfg = serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        } else {
            let map = io::parse_kv(&text)?;
            seeds_given |= map.contains_key("seeds");
            apply_settings(&mut cfg, &map, base)?;
        }
    }
    apply_settings(&mut cfg, &evaluate_overrides(a), None)?;
    if !seeds_given {
        if let Some(s) = a.env_seed {
            cfg.seeds = vec![s];
        }
    }
    if cfg.dataset.is_none() {
        return Err(Error::Config(
            "no dataset: pass --dataset, --gen-config, --demo or a config naming one".into(),
        ));
    }
    Ok(cfg)
}

fn jobs(n: usize) -> usize {
    if n == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        n
    }
}

fn export_candidates(cfg: &ExperimentConfig, data: &LabeledDataset, dir: &Path) -> Result<Vec<PathBuf>> {
    let ds = &data.dataset;
    let splits = chronological_split(ds, (cfg.split[0], cfg.split[1], cfg.split[2]))?;
    let queries = build_queries(ds, splits.test.clone())?;
    let test = ds.slice(splits.test.clone())?;
    let ctx = SamplingContext::from_train(ds.slice(splits.train.clone())?, ds.num_nodes());

    let qpath = dir.join("queries.csv");
    let mut qw = csv::Writer::from_writer(io::create_file(&qpath)?);
    qw.write_record(["query_ordinal", "src", "dst", "time"])?;
    for (i, q) in queries.iter().enumerate() {
        qw.write_record([
            i.to_string(),
            data.labels[q.src as usize].clone(),
            data.labels[q.true_dst as usize].clone(),
            q.t.to_string(),
        ])?;
    }
    qw.flush().map_err(|e| Error::io(&qpath, e))?;

    let cpath = dir.join("candidates.csv");
    let mut cw = io::CandidateWriter::new(io::create_file(&cpath)?)?;
    for &strategy in &cfg.samplers {
        for &seed in &cfg.seeds {
            let scfg = SamplerConfig::new(strategy, cfg.n_s, seed)
                .with_padding(cfg.pad_with_uniform)
                .with_collision_mode(cfg.sampler_collision_mode);
            let shared = if strategy == Strategy::SharedFixed {
                Some(shared_fixed_sample(ds.num_nodes(), &scfg)?)
            } else {
                None
            };
            let mut tracker = InductiveTracker::new();
            let mut pending = 0;
            for (i, q) in queries.iter().enumerate() {
                while pending < test.len() && test[pending].t < q.t {
                    tracker.push(&test[pending]);
                    pending += 1;
                }
                let set = ctx.sample(q, &scfg, tracker.advance_to(q.t), shared.as_ref())?;
                cw.write_set(i, seed, &set, &data.labels)?;
            }
        }
    }
    cw.finish()?;
    Ok(vec![qpath, cpath])
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let cfg = build_config(&a)?;
    let data = cfg.dataset.as_ref().expect("checked in build_config").load()?;
    let external = match &cfg.external {
        Some(spec) => {
            let file = std::fs::File::open(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
            Some(io::read_scores(std::io::BufReader::new(file), &data.labels)?)
        }
        None => None,
    };
    let report = harness::run_matrix(&cfg, &data, external.as_ref(), jobs(a.jobs))?;
    let mut written = report::emit_report(&report, &a.out, format)?;
    if a.export_candidates {
        written.extend(export_candidates(&cfg, &data, &a.out)?);
    }
    println!("{}", describe(&data));
    println!("surprise index = {:.6}", report.metadata.dataset.surprise_index);
    if let Some(w) = &report.metadata.watermark {
        println!("{w}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct CorrelateOutput {
    correlations: Vec<harness::Correlation>,
    simpson: Option<tlpeval_core::stats::SimpsonReport>,
    simpson_note: Option<String>,
}

fn load_report(path: &Path) -> Result<harness::ReportMatrix> {
    report::from_json(&io::read_file(path)?)
}

fn correlate(a: CorrelateArgs) -> Result<()> {
    let by_dataset = match a.group_by.as_str() {
        "family" => false,
        "dataset" => true,
        other => return Err(Error::Config(format!("unknown grouping `{other}`"))),
    };
    let mut correlations = Vec::new();
    let mut points = Vec::new();
    for path in &a.reports {
        let r = load_report(path)?;
        println!("{}:", path.display());
        for c in &r.correlations {
            let rho = c.rho.map_or_else(|| "undefined".to_string(), |v| format!("{v:+.4}"));
            println!("  {:<16} {:>13} vs {:<13} rho = {rho}", c.metric.to_string(), c.a, c.b);
        }
        correlations.extend(r.correlations.iter().cloned());
        for mut p in r.scatter {
            if by_dataset {
                p.group = r.metadata.dataset.name.clone();
            }
            points.push(p);
        }
    }
    let (simpson, simpson_note) = harness::simpson_from_scatter(&points);
    match (&simpson, &simpson_note) {
        (Some(s), _) => print_simpson(s),
        (None, Some(n)) => println!("simpson check not computed: {n}"),
        _ => {}
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        let path = dir.join("correlations.json");
        write_json(
            &path,
            &CorrelateOutput {
                correlations,
                simpson,
                simpson_note,
            },
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_simpson(s: &tlpeval_core::stats::SimpsonReport) {
    for (g, r) in s.groups.iter().zip(&s.within) {
        println!("  within {g}: r = {r:+.6}");
    }
    println!("  pooled: r = {:+.6}", s.pooled);
    if s.paradox {
        println!("PARADOX DETECTED");
    } else {
        println!("no paradox");
    }
}

fn demo_paradox(a: DemoArgs) -> Result<()> {
    let groups = fixtures::simpson_groups();
    for (name, pts) in &groups {
        println!("group {name}: {pts:?}");
    }
    let s = simpson_check(&groups)?;
    print_simpson(&s);
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        write_json(&dir.join("simpson.json"), &s)?;
    }
    Ok(())
}

fn order_text(o: Order) -> &'static str {
    match o {
        Order::AFirst => "A > B",
        Order::BFirst => "B > A",
        Order::Tie => "A = B",
    }
}

fn demo_flip(a: DemoArgs) -> Result<()> {
    let (ha, hb) = fixtures::flip_histograms();
    let r = ordering_flip_check(&ha, &hb, fixtures::FLIP_SAMPLE_SIZE)?;
    println!("N = {}, n_s = {}", r.universe_negatives, r.n_s);
    println!("model A: rank 5 always");
    println!("model B: rank 1 w.p. 0.25, rank 1000 w.p. 0.75");
    println!("orders read better > worse");
    println!(
        "full MRR:             A = {:.6}, B = {:.6}  ->  {}",
        r.full_mrr.0, r.full_mrr.1, order_text(r.full_mrr_order)
    );
    println!(
        "expected sampled MRR: A = {:.6}, B = {:.6}  ->  {}",
        r.expected_sampled_mrr.0, r.expected_sampled_mrr.1, order_text(r.sampled_mrr_order)
    );
    println!(
        "full mean rank:       A = {:.6}, B = {:.6}  ->  {}",
        r.full_mean_rank.0, r.full_mean_rank.1, order_text(r.mean_rank_order)
    );
    println!(
        "expected mr-hat:      A = {:.6}, B = {:.6}  ->  {}",
        r.expected_mr_hat.0, r.expected_mr_hat.1, order_text(r.mr_hat_order)
    );
    if r.flip {
        println!("FLIP DETECTED");
    } else {
        println!("no flip");
    }
    if let Some(dir) = a.out {
        create_dir(&dir)?;
        write_json(&dir.join("flip.json"), &r)?;
    }
    Ok(())
}

fn reemit(a: ReportArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let r = load_report(&a.report)?;
    if let Some(w) = &r.metadata.watermark {
        println!("{w}");
    }
    let mut rows: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for c in &r.cells {
        if let Some(v) = c.value {
            rows.entry((c.scorer.clone(), c.sampler.as_str().into(), c.metric.to_string()))
                .or_default()
                .push(v);
        }
    }
    for ((scorer, sampler, metric), vals) in &rows {
        let m = tlpeval_core::stats::mean(vals.iter().copied()).unwrap_or(f64::NAN);
        println!("{scorer:<18} {sampler:<13} {metric:<18} {m:.6}");
    }
    for e in &r.full {
        println!("{:<18} {:<13} {:<18} {:.6}", e.scorer, "full", e.metric.to_string(), e.value);
    }
    if let Some(dir) = a.out {
        for p in report::emit_report(&r, &dir, format)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
