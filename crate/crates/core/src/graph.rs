//! Temporal edge streams, chronological splits and ranking queries.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::{Error, Result};

pub type NodeId = u32;
pub type Timestamp = u64;
pub type EdgeRange = Range<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TemporalEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub t: Timestamp,
    /// Position in the time-sorted stream.
    pub idx: usize,
}

/// An immutable, time-sorted edge stream over the node universe `0..num_nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    name: String,
    num_nodes: usize,
    edges: Vec<TemporalEdge>,
}

impl Dataset {
    /// Builds a dataset from `(src, dst, t)` triples given in input order.
    ///
    /// Edges are stably sorted by timestamp, so equal timestamps keep their
    /// input order, and `idx` is assigned from the sorted position.
    pub fn new<I>(name: impl Into<String>, num_nodes: usize, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, Timestamp)>,
    {
        if num_nodes < 2 {
            return Err(Error::UniverseTooSmall(num_nodes));
        }
        let mut raw: Vec<(NodeId, NodeId, Timestamp)> = triples.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for &(src, dst, _) in &raw {
            for node in [src, dst] {
                if node as usize >= num_nodes {
                    return Err(Error::NodeOutOfRange {
                        node,
                        universe: num_nodes,
                    });
                }
            }
        }
        raw.sort_by_key(|&(_, _, t)| t);
        let edges = raw
            .into_iter()
            .enumerate()
            .map(|(idx, (src, dst, t))| TemporalEdge { src, dst, t, idx })
            .collect();
        Ok(Self {
            name: name.into(),
            num_nodes,
            edges,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Negatives in the full universe of a query: `|V| - 1`.
    pub fn universe_negatives(&self) -> usize {
        self.num_nodes - 1
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn slice(&self, range: EdgeRange) -> Result<&[TemporalEdge]> {
        if range.start > range.end || range.end > self.edges.len() {
            return Err(Error::RangeOutOfBounds {
                start: range.start,
                end: range.end,
                len: self.edges.len(),
            });
        }
        Ok(&self.edges[range])
    }
}

/// Contiguous, chronologically ordered train / validation / test ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Splits {
    pub train: EdgeRange,
    pub val: EdgeRange,
    pub test: EdgeRange,
}

impl Splits {
    /// Everything observable before the test period (train and validation).
    pub fn history(&self) -> EdgeRange {
        self.train.start..self.val.end
    }
}

/// Splits `dataset` by edge count at the cumulative `fractions`.
///
/// Each boundary is `floor(cumulative_fraction * |E|)` moved forward until
/// the timestamp changes, so no timestamp straddles two splits.
pub fn chronological_split(dataset: &Dataset, fractions: (f64, f64, f64)) -> Result<Splits> {
    let (train, val, test) = fractions;
    let valid = [train, val, test].iter().all(|f| f.is_finite() && *f > 0.0)
        && libm::fabs(train + val + test - 1.0) <= 1e-9;
    if !valid {
        return Err(Error::InvalidFractions(train, val, test));
    }
    let n = dataset.len();
    let edges = dataset.edges();
    let boundary = |cumulative: f64| -> usize {
        // the epsilon absorbs representation error such as 0.7 * 10 = 6.9999...
        let mut b = (libm::floor(cumulative * n as f64 + 1e-9) as usize).min(n);
        while b > 0 && b < n && edges[b].t == edges[b - 1].t {
            b += 1;
        }
        b
    };
    let first = boundary(train);
    let second = boundary(train + val).max(first);
    if first == 0 || second == first || second >= n {
        return Err(Error::SplitTooSmall { edges: n });
    }
    Ok(Splits {
        train: 0..first,
        val: first..second,
        test: second..n,
    })
}

/// Fraction of test edges whose `(src, dst)` pair never occurs in train or
/// validation. Timestamps are ignored and repeated test pairs count per edge.
pub fn surprise_index(dataset: &Dataset, splits: &Splits) -> Result<f64> {
    let test = dataset.slice(splits.test.clone())?;
    if test.is_empty() {
        return Err(Error::EmptyTestSplit);
    }
    let seen: BTreeSet<(NodeId, NodeId)> = dataset
        .slice(splits.history())?
        .iter()
        .map(|e| (e.src, e.dst))
        .collect();
    let novel = test
        .iter()
        .filter(|e| !seen.contains(&(e.src, e.dst)))
        .count();
    Ok(novel as f64 / test.len() as f64)
}

/// One ranking question: which destination does `src` connect to at `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Query {
    pub src: NodeId,
    pub t: Timestamp,
    pub true_dst: NodeId,
    /// Other true destinations of `src` at exactly `t`; sorted, never contains `true_dst`.
    pub filter_set: Vec<NodeId>,
    /// `idx` of the edge this query was built from.
    pub origin_idx: usize,
}

/// One query per edge in `range`. The filter set holds every other
/// destination that `src` reaches at the same timestamp.
pub fn build_queries(dataset: &Dataset, range: EdgeRange) -> Result<Vec<Query>> {
    let edges = dataset.edges();
    let selected = dataset.slice(range.clone())?;
    let mut queries = Vec::with_capacity(selected.len());
    let mut i = range.start;
    while i < range.end {
        // same-timestamp run [lo, hi) over the whole stream
        let t = edges[i].t;
        let mut lo = i;
        while lo > 0 && edges[lo - 1].t == t {
            lo -= 1;
        }
        let mut hi = i;
        while hi < edges.len() && edges[hi].t == t {
            hi += 1;
        }
        let mut by_src: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for e in &edges[lo..hi] {
            by_src.entry(e.src).or_default().insert(e.dst);
        }
        let stop = hi.min(range.end);
        for e in &edges[i..stop] {
            let filter_set = by_src[&e.src]
                .iter()
                .copied()
                .filter(|&d| d != e.dst)
                .collect();
            queries.push(Query {
                src: e.src,
                t: e.t,
                true_dst: e.dst,
                filter_set,
                origin_idx: e.idx,
            });
        }
        i = stop;
    }
    Ok(queries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn distinct(n: u64) -> Dataset {
        Dataset::new("d", 4, (0..n).map(|t| (0, 1, t))).unwrap()
    }

    #[test]
    fn sorting_is_stable_and_reindexes() {
        let d = Dataset::new("d", 3, vec![(0, 1, 5), (0, 2, 1), (1, 2, 5)]).unwrap();
        let got: Vec<_> = d.edges().iter().map(|e| (e.src, e.dst, e.t, e.idx)).collect();
        assert_eq!(got, vec![(0, 2, 1, 0), (0, 1, 5, 1), (1, 2, 5, 2)]);
    }

    #[test]
    fn rejects_bad_universe() {
        assert_eq!(
            Dataset::new("d", 1, vec![(0, 0, 1)]),
            Err(Error::UniverseTooSmall(1))
        );
        assert!(matches!(
            Dataset::new("d", 2, vec![(0, 2, 1)]),
            Err(Error::NodeOutOfRange { node: 2, .. })
        ));
        assert_eq!(
            Dataset::new("d", 2, Vec::new()),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn split_ten_edges() {
        let s = chronological_split(&distinct(10), (0.7, 0.15, 0.15)).unwrap();
        assert_eq!((s.train, s.val, s.test), (0..7, 7..8, 8..10));
    }

    #[test]
    fn split_all_same_timestamp_fails() {
        let d = Dataset::new("d", 2, vec![(0, 1, 0); 4]).unwrap();
        assert_eq!(
            chronological_split(&d, (0.5, 0.25, 0.25)),
            Err(Error::SplitTooSmall { edges: 4 })
        );
    }

    #[test]
    fn split_thirds() {
        let s = chronological_split(&distinct(3), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)).unwrap();
        assert_eq!((s.train, s.val, s.test), (0..1, 1..2, 2..3));
    }

    #[test]
    fn split_moves_boundary_past_timestamp_run() {
        let d = Dataset::new(
            "d",
            2,
            vec![(0, 1, 0), (0, 1, 1), (0, 1, 1), (0, 1, 1), (0, 1, 2), (0, 1, 3)],
        )
        .unwrap();
        let s = chronological_split(&d, (0.34, 0.5, 0.16)).unwrap();
        assert_eq!((s.train, s.val, s.test), (0..4, 4..5, 5..6));
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(matches!(
            chronological_split(&distinct(10), (0.5, 0.5, 0.5)),
            Err(Error::InvalidFractions(..))
        ));
        assert!(matches!(
            chronological_split(&distinct(10), (0.0, 0.5, 0.5)),
            Err(Error::InvalidFractions(..))
        ));
    }

    #[test]
    fn surprise_counts() {
        let d = Dataset::new(
            "d",
            5,
            vec![(0, 1, 0), (1, 2, 1), (0, 1, 2), (3, 4, 3), (2, 3, 4)],
        )
        .unwrap();
        let s = Splits {
            train: 0..1,
            val: 1..2,
            test: 2..5,
        };
        let v = surprise_index(&d, &s).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn surprise_extremes() {
        let d = Dataset::new("d", 3, vec![(0, 1, 0), (0, 1, 1), (0, 1, 2)]).unwrap();
        let s = Splits {
            train: 0..1,
            val: 1..2,
            test: 2..3,
        };
        assert_eq!(surprise_index(&d, &s).unwrap(), 0.0);
        let d = Dataset::new("d", 3, vec![(0, 1, 0), (0, 1, 1), (1, 2, 2)]).unwrap();
        assert_eq!(surprise_index(&d, &s).unwrap(), 1.0);
        let empty = Splits {
            train: 0..2,
            val: 2..3,
            test: 3..3,
        };
        assert_eq!(surprise_index(&d, &empty), Err(Error::EmptyTestSplit));
    }

    #[test]
    fn queries_share_timestamp_filters() {
        let d = Dataset::new("d", 3, vec![(0, 1, 5), (0, 2, 5)]).unwrap();
        let q = build_queries(&d, 0..2).unwrap();
        assert_eq!(q[0].filter_set, vec![2]);
        assert_eq!(q[1].filter_set, vec![1]);

        let d = Dataset::new("d", 5, vec![(3, 4, 9)]).unwrap();
        let q = build_queries(&d, 0..1).unwrap();
        assert_eq!(q.len(), 1);
        assert!(q[0].filter_set.is_empty());
    }

    #[test]
    fn duplicate_edges_filter_nothing() {
        let d = Dataset::new("d", 2, vec![(0, 1, 5), (0, 1, 5)]).unwrap();
        let q = build_queries(&d, 0..2).unwrap();
        assert_eq!(q.len(), 2);
        assert!(q.iter().all(|q| q.filter_set.is_empty()));
    }

    #[test]
    fn partial_range_sees_whole_timestamp_run() {
        let d = Dataset::new("d", 4, vec![(0, 1, 5), (0, 2, 5), (0, 3, 5)]).unwrap();
        let q = build_queries(&d, 2..3).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].filter_set, vec![1, 2]);
        assert_eq!(q[0].origin_idx, 2);
    }
}
