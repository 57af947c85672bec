//! Evaluation workbench for visual odometry and SLAM benchmarks.
//!
//! - [`traj_io`]: TUM / KITTI / EuRoC trajectory parsing and timestamp association.
//! - [`metrics`]: aligned RMSE, relative pose error, loss rate, run success rule.
//! - [`catalog`]: sequence property taxonomy and the bundled reference catalog.
//! - [`dtree`]: categorical decision trees with k-fold model selection.
//! - [`perfcluster`]: run observations, saturation, k-means++ and category labels.
//! - [`playback`]: time-dilated frame replay with drop policies and component profiling.
//! - [`report`]: per-run result records and the per-sequence accuracy table.

pub mod catalog;
pub mod dtree;
pub mod metrics;
pub mod perfcluster;
pub mod playback;
pub mod report;
pub mod traj_io;
