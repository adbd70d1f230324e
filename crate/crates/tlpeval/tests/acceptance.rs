//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlpeval::harness::{run_matrix, ExperimentConfig, Metric};
use tlpeval_core::fixtures;
use tlpeval_core::generator::{calibrate_surprise, generate, GenConfig};
use tlpeval_core::graph::chronological_split;
use tlpeval_core::metrics::{
    full_rank, mr_hat, per_source_auc, pooled_ap, pooled_roc_auc, rank_metrics, sampled_rank, RankSource,
};
use tlpeval_core::oracle::{
    expected_metric, expected_sampled_hits, expected_sampled_mrr, ordering_flip_check, ExpectedMetric,
    Order, RankHistogram,
};
use tlpeval_core::sampling::uniform_sample;
use tlpeval_core::stats::simpson_check;
use tlpeval_core::{FilterMode, NodeId, Query, SamplerConfig, Strategy, TieMode};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, limit: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    let detail = format!("{detail}; {:.2} s (limit {} s)", took.as_secs_f64(), limit.as_secs());
    check(took < limit, detail)
}

/// Synthetic full rankings over |V| = 1000: per query a random score
/// permutation and a random true destination.
struct RankSetup {
    queries: Vec<Query>,
    scores: Vec<Vec<f64>>,
    true_ranks: Vec<f64>,
}

const SETUP_NODES: usize = 1000;
const SETUP_QUERIES: usize = 200;
const SAMPLINGS: u64 = 10_000;
const SETUP_NS: usize = 20;

fn rank_setup() -> RankSetup {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
    let mut queries = Vec::new();
    let mut scores = Vec::new();
    let mut true_ranks = Vec::new();
    for i in 0..SETUP_QUERIES {
        let perm: Vec<f64> = index_sample(&mut rng, SETUP_NODES, SETUP_NODES)
            .into_iter()
            .map(|v| v as f64)
            .collect();
        let dst = rng.random_range(0..SETUP_NODES) as NodeId;
        let target = perm[dst as usize];
        true_ranks.push(1.0 + perm.iter().filter(|&&s| s > target).count() as f64);
        queries.push(Query {
            src: 0,
            t: i as u64,
            true_dst: dst,
            filter_set: Vec::new(),
            origin_idx: i,
        });
        scores.push(perm);
    }
    RankSetup {
        queries,
        scores,
        true_ranks,
    }
}

/// Per-sampling means of `R̂` and `auc_hat` across the queries.
fn sampled_estimates(setup: &RankSetup) -> (Vec<f64>, Vec<f64>) {
    let n = SETUP_NODES - 1;
    let mut r_means = Vec::with_capacity(SAMPLINGS as usize);
    let mut auc_means = Vec::with_capacity(SAMPLINGS as usize);
    let mut cand_scores = Vec::with_capacity(SETUP_NS);
    for seed in 0..SAMPLINGS {
        let cfg = SamplerConfig::new(Strategy::Uniform, SETUP_NS, seed);
        let (mut r_sum, mut auc_sum) = (0.0, 0.0);
        for (q, scores) in setup.queries.iter().zip(&setup.scores) {
            let set = uniform_sample(q, SETUP_NODES, &cfg).expect("uniform sample");
            cand_scores.clear();
            cand_scores.extend(set.candidates.iter().map(|&c| scores[c as usize]));
            let rec = sampled_rank(scores[q.true_dst as usize], &cand_scores, TieMode::Mean, n).expect("rank");
            let (r, auc) = mr_hat(&rec).expect("estimate");
            r_sum += r;
            auc_sum += auc;
        }
        r_means.push(r_sum / SETUP_QUERIES as f64);
        auc_means.push(auc_sum / SETUP_QUERIES as f64);
    }
    (r_means, auc_means)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn mr_hat_unbiased() -> Outcome {
    let start = Instant::now();
    let setup = rank_setup();
    for (q, s) in setup.queries.iter().zip(&setup.scores) {
        let rec = full_rank(s, q.true_dst, &[], TieMode::Mean, FilterMode::Raw);
        assert_eq!(rec.full_rank, Some(setup.true_ranks[q.origin_idx]));
    }
    let truth = setup.true_ranks.iter().sum::<f64>() / SETUP_QUERIES as f64;
    let (r_means, _) = sampled_estimates(&setup);
    let (m, se) = mean_and_se(&r_means);
    let rel = (m - truth).abs() / truth;
    let z = (m - truth).abs() / se;
    let stat = check(
        z <= 3.0 && rel < 0.01,
        format!("mean R-hat {m:.4} vs true mean rank {truth:.4}, |z| = {z:.2}, rel err = {rel:.2e}"),
    );
    stat.and_then(|d| within_time(start, Duration::from_secs(30), d))
}

fn auc_hat_consistent() -> Outcome {
    let start = Instant::now();
    let setup = rank_setup();
    let n = (SETUP_NODES - 1) as f64;
    let truth = setup.true_ranks.iter().map(|r| 1.0 - (r - 1.0) / n).sum::<f64>() / SETUP_QUERIES as f64;
    let (_, auc_means) = sampled_estimates(&setup);
    let (m, _) = mean_and_se(&auc_means);
    let gap = (m - truth).abs();
    check(gap <= 0.005, format!("mean auc_hat {m:.6} vs full AUC {truth:.6}, gap {gap:.2e}"))
        .and_then(|d| within_time(start, Duration::from_secs(30), d))
}

/// Monte Carlo sampled MRR: draw a rank from the histogram, then `n_s`
/// distinct negatives out of `N`, of which `R - 1` outscore the target.
fn monte_carlo_mrr(hist: &RankHistogram, n_s: usize, draws: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let universe = hist.universe_negatives() as usize;
    let masses = hist.masses();
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut rank = masses[masses.len() - 1].0;
        for &(r, p) in masses {
            acc += p;
            if u < acc {
                rank = r;
                break;
            }
        }
        let better = (rank - 1) as usize;
        let x = index_sample(rng, universe, n_s).into_iter().filter(|&i| i < better).count();
        values.push(1.0 / (1.0 + x as f64));
    }
    mean_and_se(&values)
}

fn flip_witness() -> Outcome {
    let start = Instant::now();
    let (a, b) = fixtures::flip_histograms();
    let n_s = fixtures::FLIP_SAMPLE_SIZE;
    let report = ordering_flip_check(&a, &b, n_s).map_err(|e| e.to_string())?;
    let full_a = 1.0 / 5.0;
    let full_b = 0.25 + 0.75 / 1000.0;
    let exact_ok = (report.full_mrr.0 - full_a).abs() < 1e-12
        && (report.full_mrr.1 - full_b).abs() < 1e-12
        && report.full_mrr_order == Order::BFirst
        && report.sampled_mrr_order == Order::AFirst
        && report.flip;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let (mc_a, se_a) = monte_carlo_mrr(&a, n_s as usize, draws, &mut rng);
    let (mc_b, se_b) = monte_carlo_mrr(&b, n_s as usize, draws, &mut rng);
    let (ex_a, ex_b) = report.expected_sampled_mrr;
    let (z_a, z_b) = ((mc_a - ex_a).abs() / se_a.max(1e-300), (mc_b - ex_b).abs() / se_b);
    let mc_ok = z_a <= 3.0 && z_b <= 3.0 && mc_a > mc_b;
    check(
        exact_ok && mc_ok,
        format!(
            "full MRR A={:.5} B={:.5}; exact sampled A={ex_a:.5} B={ex_b:.5}; MC A={mc_a:.5} (|z|={z_a:.2}) B={mc_b:.5} (|z|={z_b:.2})",
            report.full_mrr.0, report.full_mrr.1
        ),
    )
    .and_then(|d| within_time(start, Duration::from_secs(10), d))
}

/// Random smooth rank histogram over `1..=N+1`: a mixture of one to three
/// exponential decays (scale 500..5000 ranks) and wide uniform blocks.
fn random_histogram(universe: u64, rng: &mut ChaCha8Rng) -> RankHistogram {
    let support = universe + 1;
    let mut weights = vec![0.0f64; support as usize];
    let components = rng.random_range(1..=3);
    for _ in 0..components {
        let w: f64 = rng.random_range(0.2..1.0);
        if rng.random_bool(0.5) {
            let scale: f64 = rng.random_range(500.0..5000.0);
            let start = rng.random_range(1..=support / 2);
            let mut local = Vec::new();
            for r in start..=support {
                local.push((r, (-((r - start) as f64) / scale).exp()));
            }
            let z: f64 = local.iter().map(|x| x.1).sum();
            for (r, v) in local {
                weights[(r - 1) as usize] += w * v / z;
            }
        } else {
            let width = rng.random_range(2000..=support);
            let start = rng.random_range(1..=support - width + 1);
            for r in start..start + width {
                weights[(r - 1) as usize] += w / width as f64;
            }
        }
    }
    let masses = weights
        .into_iter()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .map(|(i, w)| (i as u64 + 1, w))
        .collect();
    RankHistogram::from_weights(universe, masses).expect("valid histogram")
}

fn hits_ck_relation() -> Outcome {
    let start = Instant::now();
    let universe = 10_000u64;
    let n_s = 100u64;
    let ck = (universe as f64 / n_s as f64).ceil() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 60;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let hist = random_histogram(universe, &mut rng);
        let sampled = expected_metric(&hist, n_s, ExpectedMetric::SampledHits(1)).map_err(|e| e.to_string())?;
        let full: f64 = hist.masses().iter().filter(|m| m.0 <= ck).map(|m| m.1).sum();
        worst = worst.max((sampled - full).abs());
    }
    check(
        worst <= 0.02,
        format!("{trials} histograms, max |sampled Hits@1 - full Hits@{ck}| = {worst:.4}"),
    )
    .and_then(|d| within_time(start, Duration::from_secs(30), d))
}

fn two_source_metrics() -> Outcome {
    let fx = fixtures::two_source();
    let ranks = fx.filtered_ranks(TieMode::Mean);
    let mrr = rank_metrics(&ranks, &[1], RankSource::Full).map_err(|e| e.to_string())?.mrr;
    let keyed: Vec<(NodeId, f64, bool)> = fx.items.iter().map(|i| (i.source, i.score, i.positive)).collect();
    let pooled: Vec<(f64, bool)> = fx.items.iter().map(|i| (i.score, i.positive)).collect();
    let macro_auc = per_source_auc(&keyed).map_err(|e| e.to_string())?.macro_auc;
    let auc = pooled_roc_auc(&pooled).map_err(|e| e.to_string())?;
    let ap = pooled_ap(&pooled).map_err(|e| e.to_string())?.value;
    // positives at pooled positions 1, 2, 5, 6
    let ap_oracle = (1.0 + 1.0 + 3.0 / 5.0 + 4.0 / 6.0) / 4.0;
    check(
        mrr == 1.0 && macro_auc == 1.0 && auc == 0.75 && (ap - 0.816667).abs() <= 1e-6 && (ap - ap_oracle).abs() < 1e-15,
        format!("filtered MRR {mrr}, macro AUC {macro_auc}, pooled AUC {auc}, pooled AP {ap:.6}"),
    )
}

fn simpson_fixture() -> Outcome {
    let r = simpson_check(&fixtures::simpson_groups()).map_err(|e| e.to_string())?;
    let within_ok = r.within.iter().all(|w| (w - 1.0).abs() <= 1e-9);
    check(
        within_ok && r.pooled < -0.3 && r.paradox,
        format!("within r = {:?}, pooled r = {:.4}, paradox = {}", r.within, r.pooled, r.paradox),
    )
}

fn surprise_calibration() -> Outcome {
    let start = Instant::now();
    let fractions = (0.7, 0.15, 0.15);
    let cfg = calibrate_surprise(&GenConfig::default(), 0.987, fractions).map_err(|e| e.to_string())?;
    let data = generate(&cfg).map_err(|e| e.to_string())?;
    let splits = chronological_split(&data, fractions).map_err(|e| e.to_string())?;
    let edges = data.edges();
    let history: HashSet<(NodeId, NodeId)> = edges[..splits.val.end].iter().map(|e| (e.src, e.dst)).collect();
    let test = &edges[splits.test.clone()];
    let novel = test.iter().filter(|e| !history.contains(&(e.src, e.dst))).count();
    let surprise = novel as f64 / test.len() as f64;
    check(
        (0.977..=0.997).contains(&surprise),
        format!("repeat_prob {:.5} gives test surprise {surprise:.4}", cfg.repeat_prob),
    )
    .and_then(|d| within_time(start, Duration::from_secs(60), d))
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn brute_force_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for universe in 1..=12u64 {
        for n_s in 1..=universe {
            let subsets: Vec<u32> = (0u32..1 << universe).filter(|m| m.count_ones() as u64 == n_s).collect();
            assert_eq!(subsets.len() as f64, binomial(universe, n_s));
            for rank in 1..=universe + 1 {
                let better = (1u32 << (rank - 1)) - 1;
                let counts: Vec<u64> = subsets.iter().map(|m| (m & better).count_ones() as u64).collect();
                let total = counts.len() as f64;
                let mrr = counts.iter().map(|&x| 1.0 / (1.0 + x as f64)).sum::<f64>() / total;
                let got = expected_sampled_mrr(rank, universe, n_s).map_err(|e| e.to_string())?;
                worst = worst.max((got - mrr).abs());
                cases += 1;
                for k in 1..=n_s + 1 {
                    let hits = counts.iter().filter(|&&x| x < k).count() as f64 / total;
                    let got = expected_sampled_hits(rank, universe, n_s, k).map_err(|e| e.to_string())?;
                    worst = worst.max((got - hits).abs());
                    cases += 1;
                }
            }
        }
    }
    check(worst <= 1e-12, format!("{cases} (N, n_s, R, metric) cases, max error {worst:.2e}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tlpeval"))
        .args(args)
        .env_remove("TLPEVAL_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read"))
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, jobs) in ["1", "4", "4", "8"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let d = dir.to_string_lossy().into_owned();
        run_cli(&["evaluate", "--demo", "--out", &d, "--jobs", jobs, "--format", "all"])?;
        runs.push(read_outputs(&dir));
    }
    let files: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    let same = runs.iter().all(|r| r == &runs[0]);
    check(
        same && files.contains(&"report.json") && files.contains(&"report.csv"),
        format!("4 demo runs (jobs 1, 4, 4, 8), files {files:?} byte-identical: {same}"),
    )
}

fn cross_sampler_instability() -> Outcome {
    let cfg = ExperimentConfig::demo();
    let data = cfg.dataset.as_ref().expect("demo dataset").load().map_err(|e| e.to_string())?;
    let report = run_matrix(&cfg, &data, None, 4).map_err(|e| e.to_string())?;
    let c = report
        .correlation(Metric::SampledMrr, "uniform", "historical")
        .ok_or("missing uniform/historical correlation")?;
    let rho = c.rho.ok_or("correlation undefined")?;
    check(
        rho < 1.0,
        format!(
            "Spearman rho(uniform, historical) over {} heuristics on sampled MRR = {rho:.3} (surprise {:.3})",
            cfg.scorers.len(),
            report.metadata.dataset.surprise_index
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("mr-hat unbiasedness", mr_hat_unbiased),
        ("auc-hat consistency", auc_hat_consistent),
        ("sampled-MRR ordering flip", flip_witness),
        ("Hits@C*K relation", hits_ck_relation),
        ("two-source pooled vs per-query metrics", two_source_metrics),
        ("Simpson fixture", simpson_fixture),
        ("surprise-index calibration", surprise_calibration),
        ("oracle vs brute-force enumeration", brute_force_oracle),
        ("evaluate determinism across runs and --jobs", determinism),
        ("cross-sampler ranking instability", cross_sampler_instability),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    println!();
    for (name, f) in criteria {
        let outcome = match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
