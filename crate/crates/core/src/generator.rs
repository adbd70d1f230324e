//! Seeded synthetic temporal graphs with power-law degrees and tunable
//! edge repetition.
//!
//! Sources and destinations are drawn from Zipf laws over randomly permuted
//! node ids. An exponent `γ` is the tail exponent of the resulting degree
//! distribution (`P(deg >= d) ~ d^(1 - γ)`), realised by rank weights
//! `k^(-1 / (γ - 1))`. With probability `repeat_prob` a step instead
//! re-emits a uniformly chosen earlier pair.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::{chronological_split, surprise_index, Dataset, NodeId, Timestamp};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenConfig {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub source_exponent: f64,
    pub dst_exponent: f64,
    pub repeat_prob: f64,
    /// Largest timestamp; must be at least the number of distinct ticks.
    pub horizon: u64,
    pub seed: u64,
    /// Consecutive edges sharing one timestamp; 1 gives strictly increasing times.
    pub burst: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            num_nodes: 10_000,
            num_edges: 100_000,
            source_exponent: 3.0,
            dst_exponent: 3.0,
            repeat_prob: 0.0,
            horizon: 100_000,
            seed: 0,
            burst: 1,
        }
    }
}

impl GenConfig {
    fn ticks(&self) -> u64 {
        self.num_edges.div_ceil(self.burst.max(1)) as u64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.num_nodes < 2 {
            return fail(format!("num_nodes must be >= 2, got {}", self.num_nodes));
        }
        if self.num_nodes > NodeId::MAX as usize {
            return fail(format!("num_nodes {} exceeds node id range", self.num_nodes));
        }
        if self.num_edges == 0 {
            return fail("num_edges must be >= 1".into());
        }
        for (name, e) in [("source_exponent", self.source_exponent), ("dst_exponent", self.dst_exponent)] {
            if !(e.is_finite() && e > 1.0) {
                return fail(format!("{name} must be > 1, got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.repeat_prob) {
            return fail(format!("repeat_prob must lie in [0, 1], got {}", self.repeat_prob));
        }
        if self.burst == 0 {
            return fail("burst must be >= 1".into());
        }
        if self.horizon < self.ticks() {
            return fail(format!(
                "horizon {} cannot hold {} distinct timestamps",
                self.horizon,
                self.ticks()
            ));
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over ranks `0..n` with weights `(k + 1)^(-alpha)`.
#[derive(Debug, Clone)]
pub struct ZipfTable {
    cumulative: Vec<f64>,
}

impl ZipfTable {
    pub fn new(n: usize, alpha: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for k in 0..n {
            acc += libm::pow(k as f64 + 1.0, -alpha);
            cumulative.push(acc);
        }
        Self { cumulative }
    }

    /// Rank for a uniform draw `u` in `[0, 1)`.
    pub fn rank(&self, u: f64) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let target = u * total;
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }

    pub fn probability(&self, rank: usize) -> f64 {
        let total = *self.cumulative.last().expect("non-empty table");
        let lower = if rank == 0 { 0.0 } else { self.cumulative[rank - 1] };
        (self.cumulative[rank] - lower) / total
    }
}

/// Zipf rank exponent producing degree tail exponent `gamma`.
pub fn rank_exponent(gamma: f64) -> f64 {
    1.0 / (gamma - 1.0)
}

fn permutation(n: usize, seed: u64, stream: u64) -> Vec<NodeId> {
    let mut rng = substream(seed, stream);
    let mut ids: Vec<NodeId> = (0..n as NodeId).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        ids.swap(i, j);
    }
    ids
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let src_table = ZipfTable::new(cfg.num_nodes, rank_exponent(cfg.source_exponent));
    let dst_table = ZipfTable::new(cfg.num_nodes, rank_exponent(cfg.dst_exponent));
    let src_ids = permutation(cfg.num_nodes, cfg.seed, 1);
    let dst_ids = permutation(cfg.num_nodes, cfg.seed, 2);
    let mut rng = substream(cfg.seed, 0);

    let ticks = cfg.ticks();
    let timestamp = |i: usize| -> Timestamp {
        let tick = (i / cfg.burst) as u64;
        if ticks == 1 {
            1
        } else {
            1 + (u128::from(tick) * u128::from(cfg.horizon - 1) / u128::from(ticks - 1)) as u64
        }
    };

    let mut pairs: Vec<(NodeId, NodeId)> = Vec::with_capacity(cfg.num_edges);
    for i in 0..cfg.num_edges {
        // a fixed number of draws per step keeps runs with different
        // repeat_prob on the same random stream
        let u_repeat: f64 = rng.random();
        let pick: u64 = rng.random();
        let u_src: f64 = rng.random();
        let u_dst: f64 = rng.random();
        let pair = if i > 0 && u_repeat < cfg.repeat_prob {
            let j = ((u128::from(pick) * i as u128) >> 64) as usize;
            pairs[j]
        } else {
            (src_ids[src_table.rank(u_src)], dst_ids[dst_table.rank(u_dst)])
        };
        pairs.push(pair);
    }
    Dataset::new(
        format!("synthetic-seed{}", cfg.seed),
        cfg.num_nodes,
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (s, d))| (s, d, timestamp(i))),
    )
}

/// Allowed gap between the calibrated and the target surprise index.
pub const SURPRISE_TOLERANCE: f64 = 0.01;
const CALIBRATION_STEPS: usize = 20;

fn measured_surprise(cfg: &GenConfig, fractions: (f64, f64, f64)) -> Result<f64> {
    let dataset = generate(cfg)?;
    let splits = chronological_split(&dataset, fractions)?;
    surprise_index(&dataset, &splits)
}

/// Searches `repeat_prob` so the generated test split's surprise index lands
/// within [`SURPRISE_TOLERANCE`] of `target`.
pub fn calibrate_surprise(cfg: &GenConfig, target: f64, fractions: (f64, f64, f64)) -> Result<GenConfig> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidParameter(format!("surprise target {target} outside [0, 1]")));
    }
    let at = |p: f64| GenConfig {
        repeat_prob: p,
        ..cfg.clone()
    };
    let high = measured_surprise(&at(0.0), fractions)?;
    let low = measured_surprise(&at(1.0), fractions)?;
    if target > high + SURPRISE_TOLERANCE || target < low - SURPRISE_TOLERANCE {
        return Err(Error::UnreachableTarget { target, low, high });
    }
    let mut best = if (high - target).abs() <= (low - target).abs() {
        (0.0, (high - target).abs())
    } else {
        (1.0, (low - target).abs())
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        let s = measured_surprise(&at(mid), fractions)?;
        if (s - target).abs() < best.1 {
            best = (mid, (s - target).abs());
        }
        // surprise falls as repetition rises
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 > SURPRISE_TOLERANCE {
        return Err(Error::UnreachableTarget { target, low, high });
    }
    Ok(at(best.0))
}
