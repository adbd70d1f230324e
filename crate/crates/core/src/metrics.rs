//! Rank and classification metrics.
//!
//! Ranks are 1-based and tie-aware: a target tied with `e` other items gets
//! `1 + better + adj(e)` where `adj` is `0`, `e / 2` or `e` for the
//! optimistic, mean and pessimistic modes.
//!
//! The sampled-rank estimator `R̂ = 1 + (N / n_s)(r_s - 1)` is unbiased for
//! the full rank `R` when the `n_s` negatives are drawn uniformly without
//! replacement from the `N` universe negatives and scores are tie-free, and
//! `1 - (R̂ - 1) / N` is the matching AUC estimate.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::graph::NodeId;
use crate::stats::{average_ranks, compensated_sum, mean, CompensatedSum};
use crate::{Error, Result};

pub use crate::sampling::CollisionMode as FilterMode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TieMode {
    #[default]
    Mean,
    Optimistic,
    Pessimistic,
}

impl TieMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TieMode::Mean => "mean",
            TieMode::Optimistic => "optimistic",
            TieMode::Pessimistic => "pessimistic",
        }
    }

    fn adjustment(self, equal: usize) -> f64 {
        match self {
            TieMode::Optimistic => 0.0,
            TieMode::Mean => equal as f64 / 2.0,
            TieMode::Pessimistic => equal as f64,
        }
    }
}

impl fmt::Display for TieMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TieMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(TieMode::Mean),
            "optimistic" => Ok(TieMode::Optimistic),
            "pessimistic" => Ok(TieMode::Pessimistic),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown tie mode `{s}`"))),
        }
    }
}

/// Per-query ranking result.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankRecord {
    pub full_rank: Option<f64>,
    pub sampled_rank: Option<f64>,
    /// Effective negative count behind `sampled_rank` (collisions removed).
    pub n_s: usize,
    /// Universe negatives `N`: `|V| - 1`, less the filter set in filtered mode.
    pub universe_negatives: usize,
    pub tie_mode: TieMode,
    pub filter_mode: FilterMode,
    /// Size of the query's filter set, whether or not it was applied.
    pub filter_count: usize,
}

fn rank_from_counts(better: usize, equal: usize, tie: TieMode) -> f64 {
    1.0 + better as f64 + tie.adjustment(equal)
}

fn count_against(target: f64, others: impl Iterator<Item = f64>) -> (usize, usize) {
    let mut better = 0;
    let mut equal = 0;
    for s in others {
        if s > target {
            better += 1;
        } else if s == target {
            equal += 1;
        }
    }
    (better, equal)
}

/// Rank of `scores[true_dst]` against every other node of the universe.
///
/// In filtered mode the filter-set members are removed from the
/// competition and from `N`; in raw mode they count as negatives.
pub fn full_rank(
    scores: &[f64],
    true_dst: NodeId,
    filter_set: &[NodeId],
    tie: TieMode,
    filter: FilterMode,
) -> RankRecord {
    let target = scores[true_dst as usize];
    let (mut better, mut equal) = count_against(
        target,
        scores
            .iter()
            .enumerate()
            .filter(|&(node, _)| node != true_dst as usize)
            .map(|(_, &s)| s),
    );
    let mut universe = scores.len() - 1;
    if filter == FilterMode::Filtered {
        let (fb, fe) = count_against(
            target,
            filter_set
                .iter()
                .filter(|&&f| f != true_dst)
                .map(|&f| scores[f as usize]),
        );
        better -= fb;
        equal -= fe;
        universe -= filter_set.len();
    }
    RankRecord {
        full_rank: Some(rank_from_counts(better, equal, tie)),
        sampled_rank: None,
        n_s: 0,
        universe_negatives: universe,
        tie_mode: tie,
        filter_mode: filter,
        filter_count: filter_set.len(),
    }
}

/// Rank of `target` among sampled negatives.
pub fn sampled_rank(
    target: f64,
    candidate_scores: &[f64],
    tie: TieMode,
    universe_negatives: usize,
) -> Result<RankRecord> {
    if candidate_scores.is_empty() {
        return Err(Error::EmptyInput("candidate set"));
    }
    let (better, equal) = count_against(target, candidate_scores.iter().copied());
    Ok(RankRecord {
        full_rank: None,
        sampled_rank: Some(rank_from_counts(better, equal, tie)),
        n_s: candidate_scores.len(),
        universe_negatives,
        tie_mode: tie,
        filter_mode: FilterMode::Raw,
        filter_count: 0,
    })
}

/// Full-rank estimate `R̂` and AUC estimate from a uniformly sampled rank.
pub fn mr_hat(rec: &RankRecord) -> Result<(f64, f64)> {
    let rs = rec
        .sampled_rank
        .ok_or_else(|| Error::InvalidParameter("record has no sampled rank".into()))?;
    if rec.n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    let n = rec.universe_negatives as f64;
    if rec.universe_negatives < rec.n_s {
        return Err(Error::InvalidParameter(alloc::format!(
            "universe negatives {} below sample size {}",
            rec.universe_negatives,
            rec.n_s
        )));
    }
    let estimate = 1.0 + n / rec.n_s as f64 * (rs - 1.0);
    Ok((estimate, 1.0 - (estimate - 1.0) / n))
}

/// `C * K` with `C = N / n_s`: sampled Hits@K tracks full Hits@(C·K).
pub fn effective_k(universe_negatives: usize, n_s: usize, k: usize) -> Result<f64> {
    if n_s == 0 {
        return Err(Error::ZeroSampleSize);
    }
    Ok(universe_negatives as f64 / n_s as f64 * k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RankSource {
    Full,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSummary {
    pub mrr: f64,
    pub mean_rank: f64,
    pub hits: BTreeMap<usize, f64>,
    /// Exact AUC for full ranks, the mean estimate for sampled ones.
    pub auc_hat: f64,
    /// Mean rank for full ranks, the mean `R̂` for sampled ones.
    pub mr_hat: f64,
    pub count: usize,
}

pub fn rank_metrics(records: &[RankRecord], ks: &[usize], which: RankSource) -> Result<MetricSummary> {
    if records.is_empty() {
        return Err(Error::EmptyInput("rank records"));
    }
    let ranks: Vec<f64> = records
        .iter()
        .map(|r| match which {
            RankSource::Full => r.full_rank,
            RankSource::Sampled => r.sampled_rank,
        })
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("{which:?} rank missing from a record")))?;
    let n = ranks.len() as f64;
    let hits = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / n))
        .collect();
    let (mr_hat, auc_hat) = match which {
        RankSource::Full => {
            let auc = records.iter().zip(&ranks).map(|(rec, r)| {
                if rec.universe_negatives == 0 {
                    1.0
                } else {
                    1.0 - (r - 1.0) / rec.universe_negatives as f64
                }
            });
            (mean(ranks.iter().copied()), mean(auc))
        }
        RankSource::Sampled => {
            let estimates = records.iter().map(mr_hat).collect::<Result<Vec<_>>>()?;
            (
                mean(estimates.iter().map(|e| e.0)),
                mean(estimates.iter().map(|e| e.1)),
            )
        }
    };
    Ok(MetricSummary {
        mrr: mean(ranks.iter().map(|r| 1.0 / r)).unwrap_or(0.0),
        mean_rank: mean(ranks.iter().copied()).unwrap_or(0.0),
        hits,
        auc_hat: auc_hat.unwrap_or(0.0),
        mr_hat: mr_hat.unwrap_or(0.0),
        count: records.len(),
    })
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann-Whitney U / (P · Q)).
pub fn pooled_roc_auc(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let ranks = average_ranks(&scores);
    let rank_sum = compensated_sum(scored.iter().zip(&ranks).filter(|(s, _)| s.1).map(|(_, r)| *r));
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PooledAp {
    pub value: f64,
    /// How equal scores were ordered; negatives go first under `Pessimistic`.
    pub tie_policy: TieMode,
}

/// Average precision over a single descending-score ordering of all items.
pub fn pooled_ap(scored: &[(f64, bool)]) -> Result<PooledAp> {
    if !scored.iter().any(|s| s.1) {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<(f64, bool)> = scored.to_vec();
    // descending score; among equals negatives (false) first
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut hits = 0usize;
    let mut acc = CompensatedSum::new();
    for (position, &(_, label)) in order.iter().enumerate() {
        if label {
            hits += 1;
            acc.add(hits as f64 / (position + 1) as f64);
        }
    }
    Ok(PooledAp {
        value: acc.value() / hits as f64,
        tie_policy: TieMode::Pessimistic,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerSourceAuc<K: Ord> {
    /// Unweighted mean over included sources.
    pub macro_auc: f64,
    pub per_source: BTreeMap<K, f64>,
    /// Sources lacking a positive or a negative.
    pub excluded: usize,
}

/// ROC-AUC within each source group, macro-averaged.
pub fn per_source_auc<K: Ord + Clone>(scored: &[(K, f64, bool)]) -> Result<PerSourceAuc<K>> {
    let mut groups: BTreeMap<K, Vec<(f64, bool)>> = BTreeMap::new();
    for (source, score, label) in scored {
        groups.entry(source.clone()).or_default().push((*score, *label));
    }
    let mut per_source = BTreeMap::new();
    let mut excluded = 0;
    for (source, items) in groups {
        match pooled_roc_auc(&items) {
            Ok(auc) => {
                per_source.insert(source, auc);
            }
            Err(_) => excluded += 1,
        }
    }
    let macro_auc = mean(per_source.values().copied()).ok_or(Error::NoIncludableGroups)?;
    Ok(PerSourceAuc {
        macro_auc,
        per_source,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use alloc::vec;
    use proptest::prelude::*;

    const EPS: f64 = 1e-12;

    fn scores_with_target(target: f64, others: &[f64]) -> Vec<f64> {
        let mut v = vec![target];
        v.extend_from_slice(others);
        v
    }

    #[test]
    fn full_rank_strict_top() {
        let s = scores_with_target(10.0, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let r = full_rank(&s, 0, &[], TieMode::Mean, FilterMode::Raw);
        assert_eq!(r.full_rank, Some(1.0));
        assert_eq!(r.universe_negatives, 9);
    }

    #[test]
    fn full_rank_mean_ties() {
        let s = scores_with_target(5.0, &[5.0, 5.0, 5.0, 5.0, 1.0, 0.0]);
        let rank = |tie| full_rank(&s, 0, &[], tie, FilterMode::Raw).full_rank.unwrap();
        // average of positions 1..=5
        assert_eq!(rank(TieMode::Mean), 3.0);
        assert_eq!(rank(TieMode::Optimistic), 1.0);
        assert_eq!(rank(TieMode::Pessimistic), 5.0);
    }

    #[test]
    fn filtered_differs_by_filter_hits() {
        let s = vec![1.0, 5.0, 6.0, 0.5, 2.0];
        let raw = full_rank(&s, 0, &[1, 2], TieMode::Mean, FilterMode::Raw);
        let filtered = full_rank(&s, 0, &[1, 2], TieMode::Mean, FilterMode::Filtered);
        assert_eq!(raw.full_rank.unwrap() - filtered.full_rank.unwrap(), 2.0);
        assert_eq!(raw.universe_negatives - filtered.universe_negatives, 2);
        assert_eq!(filtered.filter_count, 2);
    }

    #[test]
    fn sampled_rank_examples() {
        let c: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(sampled_rank(100.0, &c, TieMode::Mean, 99).unwrap().sampled_rank, Some(1.0));
        assert_eq!(sampled_rank(-1.0, &c, TieMode::Mean, 99).unwrap().sampled_rank, Some(11.0));
        let tied = sampled_rank(3.0, &[3.0, 3.0, 1.0], TieMode::Mean, 99).unwrap();
        assert_eq!(tied.sampled_rank, Some(2.0));
        assert_eq!(
            sampled_rank(1.0, &[], TieMode::Mean, 9),
            Err(Error::EmptyInput("candidate set"))
        );
    }

    fn record(rank: f64) -> RankRecord {
        RankRecord {
            full_rank: Some(rank),
            sampled_rank: Some(rank),
            n_s: 10,
            universe_negatives: 100,
            tie_mode: TieMode::Mean,
            filter_mode: FilterMode::Raw,
            filter_count: 0,
        }
    }

    #[test]
    fn rank_metrics_examples() {
        let m = rank_metrics(&[record(1.0); 3], &[1], RankSource::Full).unwrap();
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.hits[&1], 1.0);

        let m = rank_metrics(&[record(1.0), record(2.0), record(4.0)], &[1, 10], RankSource::Full).unwrap();
        assert!((m.mrr - 0.583_333_333_333_333_4).abs() < EPS);
        assert!((m.mean_rank - 7.0 / 3.0).abs() < EPS);
        assert!((m.hits[&1] - 1.0 / 3.0).abs() < EPS);
        assert_eq!(m.hits[&10], 1.0);

        let m = rank_metrics(&[record(2.0)], &[1], RankSource::Full).unwrap();
        assert_eq!(m.hits[&1], 0.0);
        assert!(rank_metrics(&[], &[1], RankSource::Full).is_err());
    }

    #[test]
    fn mr_hat_examples() {
        let mut rec = record(1.0);
        rec.universe_negatives = 999;
        assert_eq!(mr_hat(&rec).unwrap(), (1.0, 1.0));

        rec.sampled_rank = Some(3.0);
        let (est, auc) = mr_hat(&rec).unwrap();
        assert!((est - 200.8).abs() < 1e-9);
        assert!((auc - 0.8).abs() < 1e-12);

        rec.sampled_rank = Some(11.0);
        let (est, auc) = mr_hat(&rec).unwrap();
        assert!((est - 1000.0).abs() < 1e-9);
        assert!(auc.abs() < 1e-12);

        rec.n_s = 0;
        assert_eq!(mr_hat(&rec), Err(Error::ZeroSampleSize));
    }

    #[test]
    fn effective_k_examples() {
        assert_eq!(effective_k(10_000, 100, 1).unwrap(), 100.0);
        assert_eq!(effective_k(500, 500, 7).unwrap(), 7.0);
        assert!((effective_k(999, 10, 3).unwrap() - 299.7).abs() < 1e-9);
        assert_eq!(effective_k(10, 0, 1), Err(Error::ZeroSampleSize));
    }

    #[test]
    fn two_source_fixture_pooled() {
        let fx = fixtures::two_source();
        let pooled: Vec<(f64, bool)> = fx.items.iter().map(|i| (i.score, i.positive)).collect();
        assert!((pooled_roc_auc(&pooled).unwrap() - 0.75).abs() < EPS);
        let ap = pooled_ap(&pooled).unwrap();
        assert!((ap.value - (1.0 + 1.0 + 3.0 / 5.0 + 4.0 / 6.0) / 4.0).abs() < EPS);
        assert_eq!(ap.tie_policy, TieMode::Pessimistic);

        let grouped: Vec<(NodeId, f64, bool)> =
            fx.items.iter().map(|i| (i.source, i.score, i.positive)).collect();
        let ps = per_source_auc(&grouped).unwrap();
        assert_eq!(ps.macro_auc, 1.0);
        assert!(ps.per_source.values().all(|&a| a == 1.0));
        assert_eq!(ps.excluded, 0);
        assert!((ps.macro_auc - pooled_roc_auc(&pooled).unwrap() - 0.25).abs() < EPS);
    }

    #[test]
    fn classification_edge_cases() {
        assert_eq!(pooled_roc_auc(&[(0.9, true), (0.1, false)]).unwrap(), 1.0);
        assert_eq!(pooled_roc_auc(&[(0.5, true), (0.5, false)]).unwrap(), 0.5);
        assert_eq!(pooled_roc_auc(&[(0.5, true)]), Err(Error::SingleClass));
        assert_eq!(pooled_ap(&[(0.9, true), (0.1, false)]).unwrap().value, 1.0);
        let last = [(0.1, true), (0.5, false), (0.6, false), (0.7, false)];
        assert!((pooled_ap(&last).unwrap().value - 0.25).abs() < EPS);
        // a tie puts the negative first
        assert_eq!(pooled_ap(&[(0.5, true), (0.5, false)]).unwrap().value, 0.5);
        assert_eq!(pooled_ap(&[(0.5, false)]), Err(Error::NoPositives));
    }

    #[test]
    fn per_source_exclusions() {
        let scored = [(0u32, 0.9, true), (0, 0.1, false), (1, 0.4, true)];
        let ps = per_source_auc(&scored).unwrap();
        assert_eq!(ps.excluded, 1);
        assert_eq!(ps.per_source.len(), 1);
        assert_eq!(per_source_auc(&[(1u32, 0.4, true)]), Err(Error::NoIncludableGroups));
    }

    proptest! {
        #[test]
        fn tie_modes_are_ordered(scores in proptest::collection::vec(0u8..5, 2..40), target in 0usize..40) {
            let s: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
            let t = (target % s.len()) as NodeId;
            let r = |tie| full_rank(&s, t, &[], tie, FilterMode::Raw).full_rank.unwrap();
            prop_assert!(r(TieMode::Optimistic) <= r(TieMode::Mean));
            prop_assert!(r(TieMode::Mean) <= r(TieMode::Pessimistic));
        }

        #[test]
        fn sampled_over_whole_pool_is_full(scores in proptest::collection::vec(0u8..6, 2..30), target in 0usize..30) {
            let s: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
            let t = target % s.len();
            let others: Vec<f64> = s.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, v)| *v).collect();
            for tie in [TieMode::Mean, TieMode::Optimistic, TieMode::Pessimistic] {
                let full = full_rank(&s, t as NodeId, &[], tie, FilterMode::Raw).full_rank;
                let sampled = sampled_rank(s[t], &others, tie, others.len()).unwrap().sampled_rank;
                prop_assert_eq!(full, sampled);
            }
        }

        #[test]
        fn auc_hat_is_affine_in_sampled_rank(ranks in proptest::collection::vec(1usize..=21, 1..50)) {
            let records: Vec<RankRecord> = ranks.iter().map(|&r| RankRecord {
                full_rank: None,
                sampled_rank: Some(r as f64),
                n_s: 20,
                universe_negatives: 999,
                tie_mode: TieMode::Mean,
                filter_mode: FilterMode::Raw,
                filter_count: 0,
            }).collect();
            let m = rank_metrics(&records, &[], RankSource::Sampled).unwrap();
            let mean_scaled = mean(ranks.iter().map(|&r| (r as f64 - 1.0) / 20.0)).unwrap();
            prop_assert!((m.auc_hat - (1.0 - mean_scaled)).abs() < 1e-12);
        }

        #[test]
        fn auc_is_invariant_under_monotone_maps(items in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..40)) {
            prop_assume!(items.iter().any(|i| i.1) && items.iter().any(|i| !i.1));
            let mapped: Vec<(f64, bool)> = items.iter().map(|&(s, l)| (libm::exp(s) * 3.0 + 1.0, l)).collect();
            prop_assert!((pooled_roc_auc(&items).unwrap() - pooled_roc_auc(&mapped).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auc_matches_pairwise_count(items in proptest::collection::vec((0u8..6, any::<bool>()), 2..30)) {
            prop_assume!(items.iter().any(|i| i.1) && items.iter().any(|i| !i.1));
            let scored: Vec<(f64, bool)> = items.iter().map(|&(s, l)| (f64::from(s), l)).collect();
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for p in scored.iter().filter(|i| i.1) {
                for n in scored.iter().filter(|i| !i.1) {
                    pairs += 1.0;
                    if p.0 > n.0 { wins += 1.0 } else if p.0 == n.0 { wins += 0.5 }
                }
            }
            prop_assert!((pooled_roc_auc(&scored).unwrap() - wins / pairs).abs() < 1e-12);
        }

        #[test]
        fn per_source_is_perfect_under_offsets(offsets in proptest::collection::vec(-100.0f64..100.0, 1..6)) {
            let scored: Vec<(usize, f64, bool)> = offsets.iter().enumerate().flat_map(|(g, &o)| {
                [(g, o + 1.0, true), (g, o + 0.9, true), (g, o, false), (g, o - 0.5, false)]
            }).collect();
            prop_assert_eq!(per_source_auc(&scored).unwrap().macro_auc, 1.0);
        }
    }
}
