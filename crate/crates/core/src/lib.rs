//! Evaluation toolkit for whole-body lesion segmentation challenges.
//!
//! The crate covers the full path from mask files to a leaderboard:
//!
//! - [`volume`] and [`io`]: voxel grids, NIfTI-1 / rawjson parsing, SUV conversion
//!   and region exclusion.
//! - [`components`]: connected-component labeling and the reference × prediction
//!   overlap table that all lesion-level metrics are computed from.
//! - [`voxel_metrics`]: DSC, volumetric similarity, NSD and volume agreement.
//! - [`lesion_metrics`]: FPV/FNV, detection sensitivity, error taxonomy, panoptic
//!   quality, CC-DSC, pooled F1 and decile stratification.
//! - [`ranking`]: weighted challenge ranking, alternative schemes, Wilcoxon/Holm
//!   testing, bootstrap stability and patient-level classification.
//! - [`harness`]: manifests, batch evaluation, ensembling, synthetic phantoms and
//!   report emission.

#![allow(clippy::needless_range_loop)]

pub mod components;
pub mod distance;
mod error;
pub mod harness;
pub mod io;
pub mod lesion_metrics;
pub mod ranking;
pub mod volume;
pub mod voxel_metrics;

pub use error::{Error, Result};
