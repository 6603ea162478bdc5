//! Width-1 novelty tests used to prune the lookahead.
//!
//! Queries never mutate a table; updates happen separately when a node is
//! admitted to the tree.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureId, FeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoveltyMode {
    /// A state is novel if it is the first to make some feature true.
    #[default]
    Classic,
    /// A state at depth `d` is novel if some feature is true that no state at
    /// depth `<= d` has made true.
    Depth,
    /// Every state is novel (no pruning).
    None,
}

impl FromStr for NoveltyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Self::Classic),
            "depth" => Ok(Self::Depth),
            "none" => Ok(Self::None),
            other => Err(format!("unknown novelty mode `{other}` (classic|depth|none)")),
        }
    }
}

impl fmt::Display for NoveltyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Classic => "classic",
            Self::Depth => "depth",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassicTable {
    seen: HashSet<FeatureId>,
}

impl ClassicTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_novel(&self, fs: &FeatureSet) -> bool {
        fs.iter().any(|f| !self.seen.contains(&f))
    }

    pub fn update(&mut self, fs: &FeatureSet) {
        self.seen.extend(fs.iter());
    }

    pub fn seen_count(&self) -> usize {
        self.seen.len()
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.seen.contains(&f)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DepthTable {
    min_depth: HashMap<FeatureId, usize>,
}

impl DepthTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_novel(&self, fs: &FeatureSet, depth: usize) -> bool {
        fs.iter()
            .any(|f| self.min_depth.get(&f).is_none_or(|&d| d > depth))
    }

    pub fn update(&mut self, fs: &FeatureSet, depth: usize) {
        for f in fs.iter() {
            self.min_depth
                .entry(f)
                .and_modify(|d| *d = (*d).min(depth))
                .or_insert(depth);
        }
    }

    pub fn min_depth(&self, f: FeatureId) -> Option<usize> {
        self.min_depth.get(&f).copied()
    }
}

/// The table a planner carries, dispatching on [`NoveltyMode`].
#[derive(Debug, Clone)]
pub enum NoveltyTable {
    Classic(ClassicTable),
    Depth(DepthTable),
    None,
}

impl NoveltyTable {
    pub fn new(mode: NoveltyMode) -> Self {
        match mode {
            NoveltyMode::Classic => Self::Classic(ClassicTable::new()),
            NoveltyMode::Depth => Self::Depth(DepthTable::new()),
            NoveltyMode::None => Self::None,
        }
    }

    pub fn mode(&self) -> NoveltyMode {
        match self {
            Self::Classic(_) => NoveltyMode::Classic,
            Self::Depth(_) => NoveltyMode::Depth,
            Self::None => NoveltyMode::None,
        }
    }

    pub fn is_novel(&self, fs: &FeatureSet, depth: usize) -> bool {
        match self {
            Self::Classic(t) => t.is_novel(fs),
            Self::Depth(t) => t.is_novel(fs, depth),
            Self::None => true,
        }
    }

    pub fn update(&mut self, fs: &FeatureSet, depth: usize) {
        match self {
            Self::Classic(t) => t.update(fs),
            Self::Depth(t) => t.update(fs, depth),
            Self::None => {}
        }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.mode());
    }
}
