//! Small shipped fixtures that exhibit the evaluation pathologies exactly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::NodeId;
use crate::metrics::{full_rank, FilterMode, RankRecord, TieMode};
use crate::oracle::RankHistogram;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredItem {
    pub source: NodeId,
    pub dst: NodeId,
    pub score: f64,
    pub positive: bool,
}

/// Two sources whose score ranges do not overlap: every source ranks its own
/// true destinations first, yet source 0's negatives outscore source 1's
/// positives once everything is pooled.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSourceFixture {
    pub items: Vec<ScoredItem>,
}

pub fn two_source() -> TwoSourceFixture {
    let item = |source, dst, score, positive| ScoredItem {
        source,
        dst,
        score,
        positive,
    };
    TwoSourceFixture {
        items: vec![
            item(0, 2, 0.95, true),
            item(0, 3, 0.90, true),
            item(0, 4, 0.60, false),
            item(0, 5, 0.50, false),
            item(1, 6, 0.35, true),
            item(1, 7, 0.30, true),
            item(1, 8, 0.20, false),
            item(1, 9, 0.10, false),
        ],
    }
}

impl TwoSourceFixture {
    pub fn sources(&self) -> Vec<NodeId> {
        let mut s: Vec<NodeId> = self.items.iter().map(|i| i.source).collect();
        s.dedup();
        s
    }

    /// One filtered rank per positive: the query's own source items compete,
    /// the other positives of that source are filtered out.
    pub fn filtered_ranks(&self, tie: TieMode) -> Vec<RankRecord> {
        let mut out = Vec::new();
        for source in self.sources() {
            let group: Vec<&ScoredItem> = self.items.iter().filter(|i| i.source == source).collect();
            let scores: Vec<f64> = group.iter().map(|i| i.score).collect();
            for (q, _) in group.iter().enumerate().filter(|(_, i)| i.positive) {
                let filter: Vec<NodeId> = group
                    .iter()
                    .enumerate()
                    .filter(|&(j, other)| other.positive && j != q)
                    .map(|(j, _)| j as NodeId)
                    .collect();
                out.push(full_rank(&scores, q as NodeId, &filter, tie, FilterMode::Filtered));
            }
        }
        out
    }
}

/// Two groups, each perfectly positively correlated, whose union is
/// strongly negatively correlated.
pub fn simpson_groups() -> Vec<(String, Vec<(f64, f64)>)> {
    vec![
        (
            "G1".into(),
            vec![(0.80, 0.75), (0.85, 0.80), (0.90, 0.85)],
        ),
        (
            "G2".into(),
            vec![(0.20, 0.90), (0.25, 0.92), (0.30, 0.94)],
        ),
    ]
}

/// Universe negatives of the ordering-flip fixture.
pub const FLIP_UNIVERSE: u64 = 1000;
/// Sample size of the ordering-flip fixture.
pub const FLIP_SAMPLE_SIZE: u64 = 10;

/// Scorer A always ranks the target 5th; scorer B ranks it 1st a quarter of
/// the time and 1000th otherwise. B has the higher full MRR, A the higher
/// expected sampled MRR at `n_s = 10`.
pub fn flip_histograms() -> (RankHistogram, RankHistogram) {
    let a = RankHistogram::new(FLIP_UNIVERSE, vec![(5, 1.0)]).expect("valid fixture");
    let b = RankHistogram::new(FLIP_UNIVERSE, vec![(1, 0.25), (1000, 0.75)]).expect("valid fixture");
    (a, b)
}
