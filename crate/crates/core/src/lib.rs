//! Closest pair of a point set under batch insertions and deletions, kept
//! over a randomized sparse partition, together with static closest-pair
//! algorithms and the tooling to benchmark them.

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grid;
pub mod heap;
pub mod ids;
pub mod kdtree;
pub mod partition;
pub mod statics;

pub use error::{Error, Result};
pub use geometry::{distance, grid_key, neighborhood_keys, GridKey, PairResult, Point};
pub use grid::GridDict;
pub use heap::{BatchHeap, HeapEntry, HeapKey, HeapifyMode, KeyUpdate};
pub use kdtree::DynKdTree;
pub use statics::StaticAlgo;
pub use partition::{
    BatchStats, Config, HeapProtocol, LevelInfo, Mode, RestrictedDistance, SparsePartition, ValidationReport,
};
