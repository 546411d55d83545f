//! Multi-view consistency active learning for 3D pose estimation.
//!
//! Geometry, heatmap uncertainty, frame selection, self-training and a
//! simulated detector, all `no_std` + `alloc`. File formats and the command
//! line live in the `mvactive` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod active_learning;
pub mod analysis;
pub mod campaign;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod heatmap;
pub mod pose;
pub mod rng;
pub mod self_training;
pub mod sim_model;
pub mod synthetic;

pub use error::{Error, Result};
pub use nalgebra;
