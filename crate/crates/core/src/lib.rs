//! Pedestrian hotspot maps built from repeated drive logs, and replay of
//! test drives against them to issue and score driver advisories.
//!
//! The pipeline has three stages:
//!
//! 1. [`ingest`] bins training fixes into one-second intervals and turns
//!    every interval with pedestrians into a [`HotspotNode`] at the median
//!    vehicle position.
//! 2. [`spatial_index`] indexes node positions in a haversine ball tree.
//! 3. [`advisory`] walks a test drive in steps of `K` meters and raises an
//!    advisory whenever a hotspot lies ahead within stopping distance.
//!
//! [`evaluation`] scores the resulting timelines against labelled windows.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the type
//! parameters default to `f64`, and `*32` aliases are provided below.

// Comparisons are written as `!(x > 0)` on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advisory;
pub mod error;
pub mod evaluation;
pub mod geodesy;
pub mod ingest;
pub mod io;
pub mod scalar;
pub mod spatial_index;
pub mod synthetic;

pub use advisory::{
    checkpoints, estimate_kinematics, evaluate_checkpoint, parse_drive_log, run_replay, stopping_distance,
    AdvisoryConfig, AdvisoryDecision, AdvisoryTimeline, Checkpoint, DriveTrace, Kinematics, TraceFix, Transition,
    TransitionKind,
};
pub use error::{Error, Result};
pub use evaluation::{
    match_advisories, precision, recall, sweep_sampling_distance, EvalCounts, EvalReport, EvalRow,
    GroundTruthWindow,
};
pub use geodesy::{angular_separation, haversine_distance, initial_bearing, interpolate_along, GeoPoint, Heading};
pub use ingest::{
    aggregate_interval, build_map, merge_maps, parse_detection_log, split_intervals, CountMode, DetectionRecord,
    HotspotMap, HotspotNode, Interval,
};
pub use scalar::Scalar;
pub use spatial_index::{nearest_brute_force, BallTree, NeighborResult};

pub type GeoPoint32 = GeoPoint<f32>;
pub type GeoPoint64 = GeoPoint<f64>;
pub type Heading32 = Heading<f32>;
pub type Heading64 = Heading<f64>;
pub type HotspotMap32 = HotspotMap<f32>;
pub type HotspotMap64 = HotspotMap<f64>;
pub type BallTree32 = BallTree<f32>;
pub type BallTree64 = BallTree<f64>;
pub type DriveTrace32 = DriveTrace<f32>;
pub type DriveTrace64 = DriveTrace<f64>;
pub type AdvisoryConfig32 = AdvisoryConfig<f32>;
pub type AdvisoryConfig64 = AdvisoryConfig<f64>;
pub type AdvisoryTimeline32 = AdvisoryTimeline<f32>;
pub type AdvisoryTimeline64 = AdvisoryTimeline<f64>;
