//! Evaluation kernel for temporal link prediction.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds without `std`; file formats, the experiment harness and the
//! command line live in the `tlpeval` companion crate.
//!
//! The pieces, bottom-up:
//!
//! * [`graph`]: time-sorted edge streams, chronological splits, ranking
//!   queries and the surprise index.
//! * [`sampling`]: uniform, historical, inductive, popularity and shared
//!   fixed negative samplers with per-query deterministic seeding.
//! * [`scorers`]: recency / popularity heuristics at local or global scale.
//! * [`metrics`]: full and sampled ranks, MRR / Hits@K, the mean-rank
//!   estimator, pooled and per-source ROC-AUC and average precision.
//! * [`oracle`]: exact hypergeometric expectations of sampled metrics.
//! * [`generator`]: seeded power-law temporal graphs with tunable repetition.
//! * [`stats`]: Pearson, Spearman, Simpson's-paradox detection and
//!   compensated summation.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod fixtures;
pub mod generator;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod scorers;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{Dataset, EdgeRange, NodeId, Query, Splits, TemporalEdge, Timestamp};
pub use metrics::{FilterMode, MetricSummary, RankRecord, TieMode};
pub use sampling::{CandidateSet, CollisionMode, SamplerConfig, Strategy};
pub use scorers::{Scale, ScorerKind, ScorerState, Signal};

/// Version string shared by every artifact that embeds it.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
