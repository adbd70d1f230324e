//! Negative candidate generation.
//!
//! All samplers draw without replacement and never return the query's true
//! destination. Randomness for a query comes from the sub-stream
//! `(seed, origin_idx)`, so a candidate set does not depend on which other
//! queries were sampled before it or on which thread did the work.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::graph::{NodeId, Query, TemporalEdge, Timestamp};
use crate::rng::{substream, StreamRng, SHARED_STREAM};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Strategy {
    Uniform,
    Historical,
    Inductive,
    Popularity,
    SharedFixed,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Uniform,
        Strategy::Historical,
        Strategy::Inductive,
        Strategy::Popularity,
        Strategy::SharedFixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Historical => "historical",
            Strategy::Inductive => "inductive",
            Strategy::Popularity => "popularity",
            Strategy::SharedFixed => "shared-fixed",
        }
    }

    /// Whether candidates are drawn uniformly from the whole universe, the
    /// precondition for the mean-rank estimator to be unbiased.
    pub fn is_uniform(self) -> bool {
        matches!(self, Strategy::Uniform | Strategy::SharedFixed)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "shared_fixed" && *k == Strategy::SharedFixed))
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown sampler `{s}`")))
    }
}

/// Whether same-timestamp true destinations may appear among the negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CollisionMode {
    #[default]
    Raw,
    Filtered,
}

impl CollisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CollisionMode::Raw => "raw",
            CollisionMode::Filtered => "filtered",
        }
    }
}

impl fmt::Display for CollisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CollisionMode::Raw),
            "filtered" => Ok(CollisionMode::Filtered),
            _ => Err(Error::InvalidParameter(alloc::format!(
                "unknown collision mode `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub n_s: usize,
    pub seed: u64,
    pub pad_with_uniform: bool,
    pub collision_mode: CollisionMode,
}

impl SamplerConfig {
    /// Raw collisions, padding on.
    pub fn new(strategy: Strategy, n_s: usize, seed: u64) -> Self {
        Self {
            strategy,
            n_s,
            seed,
            pad_with_uniform: true,
            collision_mode: CollisionMode::Raw,
        }
    }

    pub fn with_padding(mut self, pad: bool) -> Self {
        self.pad_with_uniform = pad;
        self
    }

    pub fn with_collision_mode(mut self, mode: CollisionMode) -> Self {
        self.collision_mode = mode;
        self
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.n_s == 0 {
            return Err(Error::ZeroSampleSize);
        }
        let limit = match self.strategy {
            Strategy::SharedFixed => num_nodes,
            _ => num_nodes.saturating_sub(1),
        };
        if self.n_s > limit {
            return Err(Error::PoolTooSmall {
                requested: self.n_s,
                pool: limit,
            });
        }
        Ok(())
    }

    fn rng_for(&self, q: &Query) -> StreamRng {
        substream(self.seed, q.origin_idx as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandidateSet {
    /// Owning query's `origin_idx`, `None` for the shared set itself.
    pub query_ref: Option<usize>,
    pub candidates: Vec<NodeId>,
    pub strategy: Strategy,
    /// Effective sample size, `candidates.len()`.
    pub n_s: usize,
    pub collision_mode: CollisionMode,
    /// Trailing candidates that came from uniform padding.
    pub padded: usize,
    /// Shared-set members removed for this query (true destination or filter hits).
    pub collisions: usize,
}

impl CandidateSet {
    /// Candidates drawn from the strategy's own pool (everything before the padding).
    pub fn pooled(&self) -> &[NodeId] {
        &self.candidates[..self.candidates.len() - self.padded]
    }
}

/// Node ids a query may never receive as negatives, sorted and distinct.
fn exclusions(q: &Query, mode: CollisionMode) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(1 + q.filter_set.len());
    out.push(q.true_dst);
    if mode == CollisionMode::Filtered {
        out.extend_from_slice(&q.filter_set);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Draws `k` distinct ids uniformly from `0..num_nodes` minus `excluded`
/// (sorted, distinct, all `< num_nodes`) without materialising the pool.
fn uniform_from_complement(
    num_nodes: usize,
    excluded: &[NodeId],
    k: usize,
    rng: &mut StreamRng,
) -> Result<Vec<NodeId>> {
    let pool = num_nodes - excluded.len();
    if k > pool {
        return Err(Error::PoolTooSmall { requested: k, pool });
    }
    Ok(rand::seq::index::sample(rng, pool, k)
        .into_iter()
        .map(|i| {
            let mut node = i as NodeId;
            for &e in excluded {
                if e <= node {
                    node += 1;
                } else {
                    break;
                }
            }
            node
        })
        .collect())
}

fn merge_sorted(a: &[NodeId], b: &[NodeId]) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Uniform negatives from `V \ {true_dst}` (raw) or `V \ ({true_dst} ∪ filter_set)`.
pub fn uniform_sample(q: &Query, num_nodes: usize, cfg: &SamplerConfig) -> Result<CandidateSet> {
    if cfg.n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    let excluded = exclusions(q, cfg.collision_mode);
    let mut rng = cfg.rng_for(q);
    let candidates = uniform_from_complement(num_nodes, &excluded, cfg.n_s, &mut rng)?;
    Ok(CandidateSet {
        query_ref: Some(q.origin_idx),
        n_s: candidates.len(),
        candidates,
        strategy: Strategy::Uniform,
        collision_mode: cfg.collision_mode,
        padded: 0,
        collisions: 0,
    })
}

/// Draws from `pool` (already free of exclusions) and pads with uniform
/// negatives on shortfall when the config allows it.
fn draw_with_padding(
    q: &Query,
    num_nodes: usize,
    pool: Vec<NodeId>,
    excluded: &[NodeId],
    strategy: Strategy,
    cfg: &SamplerConfig,
    rng: &mut StreamRng,
) -> Result<CandidateSet> {
    if cfg.n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    if pool.len() < cfg.n_s && !cfg.pad_with_uniform {
        return Err(Error::Shortfall {
            strategy,
            requested: cfg.n_s,
            available: pool.len(),
        });
    }
    let take = cfg.n_s.min(pool.len());
    let mut candidates: Vec<NodeId> = rand::seq::index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    let padded = cfg.n_s - take;
    if padded > 0 {
        let mut chosen = candidates.clone();
        chosen.sort_unstable();
        let blocked = merge_sorted(excluded, &chosen);
        candidates.extend(uniform_from_complement(num_nodes, &blocked, padded, rng)?);
    }
    Ok(CandidateSet {
        query_ref: Some(q.origin_idx),
        n_s: candidates.len(),
        candidates,
        strategy,
        collision_mode: cfg.collision_mode,
        padded,
        collisions: 0,
    })
}

/// Destinations each source has reached, keyed by source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairIndex {
    partners: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl PairIndex {
    pub fn from_edges(edges: &[TemporalEdge]) -> Self {
        let mut index = Self::default();
        for e in edges {
            index.insert(e.src, e.dst);
        }
        index
    }

    pub fn insert(&mut self, src: NodeId, dst: NodeId) -> bool {
        self.partners.entry(src).or_default().insert(dst)
    }

    pub fn contains(&self, src: NodeId, dst: NodeId) -> bool {
        self.partners.get(&src).is_some_and(|s| s.contains(&dst))
    }

    pub fn partners(&self, src: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.partners.get(&src).into_iter().flatten().copied()
    }

    pub fn num_pairs(&self) -> usize {
        self.partners.values().map(BTreeSet::len).sum()
    }
}

/// Negatives among the destinations `q.src` reached during training.
pub fn historical_sample(
    q: &Query,
    num_nodes: usize,
    train_pairs: &PairIndex,
    cfg: &SamplerConfig,
) -> Result<CandidateSet> {
    let excluded = exclusions(q, cfg.collision_mode);
    let pool: Vec<NodeId> = train_pairs
        .partners(q.src)
        .filter(|d| excluded.binary_search(d).is_err())
        .collect();
    let mut rng = cfg.rng_for(q);
    draw_with_padding(q, num_nodes, pool, &excluded, Strategy::Historical, cfg, &mut rng)
}

/// Negatives among the destinations `q.src` first reached during the test
/// period (seen in test so far, never in training).
///
/// `test_so_far` must only contain pairs with timestamps strictly before `q.t`.
pub fn inductive_sample(
    q: &Query,
    num_nodes: usize,
    test_so_far: &PairIndex,
    train_pairs: &PairIndex,
    cfg: &SamplerConfig,
) -> Result<CandidateSet> {
    let excluded = exclusions(q, cfg.collision_mode);
    let pool: Vec<NodeId> = test_so_far
        .partners(q.src)
        .filter(|&d| !train_pairs.contains(q.src, d) && excluded.binary_search(&d).is_err())
        .collect();
    let mut rng = cfg.rng_for(q);
    draw_with_padding(q, num_nodes, pool, &excluded, Strategy::Inductive, cfg, &mut rng)
}

/// Destination occurrence counts indexed by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DstCounts {
    counts: Vec<u64>,
}

impl DstCounts {
    pub fn from_edges(edges: &[TemporalEdge], num_nodes: usize) -> Self {
        let mut counts = alloc::vec![0; num_nodes];
        for e in edges {
            counts[e.dst as usize] += 1;
        }
        Self { counts }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn get(&self, node: NodeId) -> u64 {
        self.counts.get(node as usize).copied().unwrap_or(0)
    }
}

/// Negatives drawn with probability proportional to training destination
/// counts, renormalising after every draw.
pub fn popularity_sample(
    q: &Query,
    num_nodes: usize,
    counts: &DstCounts,
    cfg: &SamplerConfig,
) -> Result<CandidateSet> {
    if cfg.n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    let excluded = exclusions(q, cfg.collision_mode);
    let mut support: Vec<(NodeId, u64)> = counts
        .counts
        .iter()
        .enumerate()
        .filter(|&(node, &c)| c > 0 && excluded.binary_search(&(node as NodeId)).is_err())
        .map(|(node, &c)| (node as NodeId, c))
        .collect();
    if support.len() < cfg.n_s && !cfg.pad_with_uniform {
        return Err(Error::Shortfall {
            strategy: Strategy::Popularity,
            requested: cfg.n_s,
            available: support.len(),
        });
    }
    let mut rng = cfg.rng_for(q);
    let take = cfg.n_s.min(support.len());
    let mut total: u64 = support.iter().map(|&(_, c)| c).sum();
    let mut candidates = Vec::with_capacity(cfg.n_s);
    for _ in 0..take {
        let mut ticket = rng.random_range(0..total);
        let pos = support
            .iter()
            .position(|&(_, c)| {
                if ticket < c {
                    true
                } else {
                    ticket -= c;
                    false
                }
            })
            .expect("ticket below total weight");
        let (node, c) = support.remove(pos);
        total -= c;
        candidates.push(node);
    }
    let padded = cfg.n_s - take;
    if padded > 0 {
        let mut chosen = candidates.clone();
        chosen.sort_unstable();
        let blocked = merge_sorted(&excluded, &chosen);
        candidates.extend(uniform_from_complement(num_nodes, &blocked, padded, &mut rng)?);
    }
    Ok(CandidateSet {
        query_ref: Some(q.origin_idx),
        n_s: candidates.len(),
        candidates,
        strategy: Strategy::Popularity,
        collision_mode: cfg.collision_mode,
        padded,
        collisions: 0,
    })
}

/// One uniform candidate set for every query.
pub fn shared_fixed_sample(num_nodes: usize, cfg: &SamplerConfig) -> Result<CandidateSet> {
    if cfg.n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    let mut rng = substream(cfg.seed, SHARED_STREAM);
    let candidates = uniform_from_complement(num_nodes, &[], cfg.n_s, &mut rng)?;
    Ok(CandidateSet {
        query_ref: None,
        n_s: candidates.len(),
        candidates,
        strategy: Strategy::SharedFixed,
        collision_mode: cfg.collision_mode,
        padded: 0,
        collisions: 0,
    })
}

/// Restricts a shared set to one query: removes the true destination and,
/// in filtered mode, filter-set members, recording the reduced size.
pub fn restrict_shared(shared: &CandidateSet, q: &Query) -> CandidateSet {
    let excluded = exclusions(q, shared.collision_mode);
    let candidates: Vec<NodeId> = shared
        .candidates
        .iter()
        .copied()
        .filter(|d| excluded.binary_search(d).is_err())
        .collect();
    CandidateSet {
        query_ref: Some(q.origin_idx),
        n_s: candidates.len(),
        collisions: shared.candidates.len() - candidates.len(),
        candidates,
        strategy: Strategy::SharedFixed,
        collision_mode: shared.collision_mode,
        padded: 0,
    }
}

/// Test-period pairs visible to the inductive sampler.
///
/// Edges are queued with [`InductiveTracker::push`] after their query is
/// answered and only become visible once the clock moves past their
/// timestamp, so same-timestamp edges never leak into each other's pools.
#[derive(Debug, Clone, Default)]
pub struct InductiveTracker {
    seen: PairIndex,
    pending: Vec<(NodeId, NodeId, Timestamp)>,
}

impl InductiveTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: &TemporalEdge) {
        self.pending.push((e.src, e.dst, e.t));
    }

    /// Publishes every queued pair with timestamp `< t`.
    pub fn advance_to(&mut self, t: Timestamp) -> &PairIndex {
        let seen = &mut self.seen;
        self.pending.retain(|&(src, dst, et)| {
            if et < t {
                seen.insert(src, dst);
                false
            } else {
                true
            }
        });
        &self.seen
    }

    pub fn seen(&self) -> &PairIndex {
        &self.seen
    }
}

/// Pools and shared sets needed to run any strategy over one test sweep.
#[derive(Debug, Clone)]
pub struct SamplingContext {
    pub num_nodes: usize,
    pub train_pairs: PairIndex,
    pub dst_counts: DstCounts,
}

impl SamplingContext {
    pub fn from_train(train: &[TemporalEdge], num_nodes: usize) -> Self {
        Self {
            num_nodes,
            train_pairs: PairIndex::from_edges(train),
            dst_counts: DstCounts::from_edges(train, num_nodes),
        }
    }

    /// Candidates for `q` under `cfg`. `shared` must be the set produced by
    /// [`shared_fixed_sample`] with the same config when the strategy is
    /// [`Strategy::SharedFixed`].
    pub fn sample(
        &self,
        q: &Query,
        cfg: &SamplerConfig,
        test_so_far: &PairIndex,
        shared: Option<&CandidateSet>,
    ) -> Result<CandidateSet> {
        match cfg.strategy {
            Strategy::Uniform => uniform_sample(q, self.num_nodes, cfg),
            Strategy::Historical => historical_sample(q, self.num_nodes, &self.train_pairs, cfg),
            Strategy::Inductive => {
                inductive_sample(q, self.num_nodes, test_so_far, &self.train_pairs, cfg)
            }
            Strategy::Popularity => popularity_sample(q, self.num_nodes, &self.dst_counts, cfg),
            Strategy::SharedFixed => match shared {
                Some(set) => Ok(restrict_shared(set, q)),
                None => Ok(restrict_shared(&shared_fixed_sample(self.num_nodes, cfg)?, q)),
            },
        }
    }
}
