//! Recency and popularity heuristics at local (per-source) or global scale.
//!
//! A scorer keeps one statistic per key: the key is the `(src, dst)` pair at
//! local scale and `dst` alone at global scale. Popularity counts
//! occurrences, recency keeps the latest timestamp. Keys never observed
//! score [`UNSEEN_SCORE`], which sits below every legal statistic.

use alloc::collections::BTreeMap;
use core::fmt;
use core::str::FromStr;

use crate::graph::{NodeId, TemporalEdge, Timestamp};
use crate::{Error, Result};

pub const UNSEEN_SCORE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scale {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Signal {
    Recency,
    Popularity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScorerKind {
    pub scale: Scale,
    pub signal: Signal,
}

impl ScorerKind {
    pub const LOCAL_RECENCY: Self = Self::new(Scale::Local, Signal::Recency);
    pub const LOCAL_POPULARITY: Self = Self::new(Scale::Local, Signal::Popularity);
    pub const GLOBAL_RECENCY: Self = Self::new(Scale::Global, Signal::Recency);
    pub const GLOBAL_POPULARITY: Self = Self::new(Scale::Global, Signal::Popularity);
    pub const ALL: [Self; 4] = [
        Self::LOCAL_RECENCY,
        Self::LOCAL_POPULARITY,
        Self::GLOBAL_RECENCY,
        Self::GLOBAL_POPULARITY,
    ];

    pub const fn new(scale: Scale, signal: Signal) -> Self {
        Self { scale, signal }
    }

    pub fn as_str(self) -> &'static str {
        match (self.scale, self.signal) {
            (Scale::Local, Signal::Recency) => "local-recency",
            (Scale::Local, Signal::Popularity) => "local-popularity",
            (Scale::Global, Signal::Recency) => "global-recency",
            (Scale::Global, Signal::Popularity) => "global-popularity",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown scorer `{s}`")))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ScorerKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ScorerKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScorerState {
    kind: ScorerKind,
    local_table: BTreeMap<NodeId, BTreeMap<NodeId, u64>>,
    global_table: BTreeMap<NodeId, u64>,
    clock: Option<Timestamp>,
}

impl ScorerState {
    pub fn new(kind: ScorerKind) -> Self {
        Self {
            kind,
            local_table: BTreeMap::new(),
            global_table: BTreeMap::new(),
            clock: None,
        }
    }

    /// Folds every edge of a time-sorted slice into a fresh state.
    pub fn fit(edges: &[TemporalEdge], kind: ScorerKind) -> Result<Self> {
        let mut state = Self::new(kind);
        for (position, e) in edges.iter().enumerate() {
            state.update(e).map_err(|_| Error::UnsortedEdges { position })?;
        }
        Ok(state)
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn clock(&self) -> Option<Timestamp> {
        self.clock
    }

    pub fn update(&mut self, e: &TemporalEdge) -> Result<()> {
        if let Some(clock) = self.clock {
            if e.t < clock {
                return Err(Error::TimeRegression { clock, t: e.t });
            }
        }
        let slot = match self.kind.scale {
            Scale::Local => self
                .local_table
                .entry(e.src)
                .or_default()
                .entry(e.dst)
                .or_insert(0),
            Scale::Global => self.global_table.entry(e.dst).or_insert(0),
        };
        match self.kind.signal {
            Signal::Popularity => *slot += 1,
            Signal::Recency => *slot = e.t,
        }
        self.clock = Some(e.t);
        Ok(())
    }

    /// Stored statistic for the key, or `None` if it was never observed.
    pub fn statistic(&self, src: NodeId, dst: NodeId) -> Option<u64> {
        match self.kind.scale {
            Scale::Local => self.local_table.get(&src)?.get(&dst).copied(),
            Scale::Global => self.global_table.get(&dst).copied(),
        }
    }

    pub fn score(&self, src: NodeId, dst: NodeId) -> f64 {
        self.statistic(src, dst).map_or(UNSEEN_SCORE, |v| v as f64)
    }

    /// Writes `score(src, d)` into `out[d]` for every node `d < out.len()`.
    pub fn score_into(&self, src: NodeId, out: &mut [f64]) {
        out.fill(UNSEEN_SCORE);
        let table = match self.kind.scale {
            Scale::Local => match self.local_table.get(&src) {
                Some(t) => t,
                None => return,
            },
            Scale::Global => &self.global_table,
        };
        for (&dst, &v) in table {
            if let Some(slot) = out.get_mut(dst as usize) {
                *slot = v as f64;
            }
        }
    }
}
