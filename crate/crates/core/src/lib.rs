//! Incremental centroid-based extractive summarization.
//!
//! Points arrive one at a time; after every arrival the crate reports the k
//! points nearest to the running centroid of everything seen so far. The
//! [`engine::CoverSumm`] summarizer answers most steps from a small cached
//! reservoir and only queries the [`sgtree::SgTree`] index when the centroid
//! has drifted far enough that the cache might be stale.

pub mod baselines;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod harness;
pub mod index;
pub mod io;
pub mod oracle;
pub mod sgtree;
pub mod vectorspace;

pub use engine::{CoverSumm, EngineConfig, StepRecord, Summary, Summarizer, Variant};
pub use error::{CoverSummError, Result};
pub use index::{LinearIndex, Neighbor, NeighborIndex, ReservoirResult};
pub use sgtree::SgTree;
pub use vectorspace::{distance, BoundParams, DeltaSchedule, Point, PointId, RunningCentroid};
