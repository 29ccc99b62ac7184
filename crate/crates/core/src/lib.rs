//! Freeway segment travel times from connected-vehicle basic safety messages,
//! and short-term travel-time prediction with tree-based regression ensembles.
//!
//! The crate is organized as a pipeline:
//!
//! * [`geodata`]: segment geometry, point-to-polyline distance, map matching.
//! * [`estimation`]: BSM parsing, geographic partitioning, per-interval
//!   aggregation, travel-time matrix construction and gap interpolation.
//! * [`features`]: supervised datasets (lagged travel times plus calendar
//!   indices) built from a matrix, and Pearson screening of candidates.
//! * [`learners`]: regression trees and the ensemble family built on them
//!   (single tree, bagging, random forest, AdaBoost.R2, gradient boosting,
//!   and second-order boosting with leaf regularization).
//! * [`tuning`]: MAPE, k-fold cross-validation, grid search, horizon
//!   evaluation, peak/off-peak splits.
//! * [`synth`]: deterministic synthetic trajectory and matrix generators
//!   used for testing and benchmarking.
//!
//! Everything is deterministic given a seed: random streams are derived
//! per-tree and per-fold, reductions run in fixed orders, and aggregation
//! uses exact integer accumulation, so results do not depend on worker
//! count or partitioning.

pub mod error;
pub mod estimation;
pub mod features;
pub mod geodata;
pub mod learners;
pub mod synth;
pub mod tuning;

pub use error::Error;
pub use estimation::{BsmRecord, BoundingBox, DayWindow, IntervalAggregate, TravelTimeMatrix};
pub use features::{FeatureSpec, SupervisedDataset};
pub use geodata::{MatchGates, MatchResult, Segment};
pub use learners::{Ensemble, Hyperparams, Kind, RegressionTree};
pub use synth::CongestionProfile;
pub use tuning::{GridSpec, TuneResult};

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
