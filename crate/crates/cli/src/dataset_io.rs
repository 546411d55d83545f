//! JSON dataset files.
//!
//! ```json
//! {
//!   "keypoints": 15,
//!   "image_width": 1000.0,
//!   "image_height": 1000.0,
//!   "cameras": [{"id": 0, "intrinsics": [9 values, row-major],
//!                "rotation": [9 values, row-major], "translation": [x, y, z]}],
//!   "frames": [{"id": 0, "keypoints": [[x, y, z], ...]}],
//!   "splits": {"train": [0, 1, ...], "heldout": [...]}
//! }
//! ```
//!
//! Lengths are in mm, image coordinates in px. Numbers are written in their
//! shortest round-trip decimal form, so save → load is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use mvactive_core::dataset::{Dataset, Frame, FrameId};
use mvactive_core::geometry::{CameraParams, Point3};
use mvactive_core::nalgebra::{Matrix3, Vector3};
use mvactive_core::pose::Pose3D;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraRecord {
    id: usize,
    intrinsics: [f64; 9],
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    id: u64,
    keypoints: Vec<[f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Splits {
    train: Vec<u64>,
    heldout: Vec<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    keypoints: usize,
    image_width: f64,
    image_height: f64,
    cameras: Vec<CameraRecord>,
    frames: Vec<FrameRecord>,
    splits: Splits,
}

fn invariant(what: impl std::fmt::Display) -> DatasetError {
    DatasetError::InvariantViolation(what.to_string())
}

/// Parses a dataset document and checks its invariants.
pub fn parse_dataset(text: &str) -> Result<Dataset, DatasetError> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut cameras = Vec::with_capacity(file.cameras.len());
    for c in &file.cameras {
        let camera = CameraParams::new(
            c.id,
            Matrix3::from_row_slice(&c.intrinsics),
            Matrix3::from_row_slice(&c.rotation),
            Vector3::from_column_slice(&c.translation),
        )
        .map_err(|e| invariant(format_args!("camera {}: {e}", c.id)))?;
        cameras.push(camera);
    }

    let mut frames = Vec::with_capacity(file.frames.len());
    for f in file.frames {
        if f.keypoints.len() != file.keypoints {
            return Err(invariant(format_args!(
                "frame {} has {} keypoints, header declares {}",
                f.id,
                f.keypoints.len(),
                file.keypoints
            )));
        }
        let points = f.keypoints.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect();
        let pose = Pose3D::new(points).map_err(|e| invariant(format_args!("frame {}: {e}", f.id)))?;
        frames.push(Frame { id: FrameId(f.id), pose });
    }

    let ids = |v: Vec<u64>| v.into_iter().map(FrameId).collect();
    Dataset::new(cameras, frames, ids(file.splits.train), ids(file.splits.heldout), file.image_width, file.image_height)
        .map_err(invariant)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    parse_dataset(&text)
}

/// Serializes a dataset as pretty-printed JSON.
pub fn dataset_to_string(dataset: &Dataset) -> String {
    let row_major = |m: &Matrix3<f64>| {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = m[(r, c)];
            }
        }
        out
    };
    let file = DatasetFile {
        keypoints: dataset.keypoints,
        image_width: dataset.image_width,
        image_height: dataset.image_height,
        cameras: dataset
            .cameras
            .iter()
            .map(|c| CameraRecord {
                id: c.id(),
                intrinsics: row_major(c.intrinsics()),
                rotation: row_major(c.rotation()),
                translation: [c.translation().x, c.translation().y, c.translation().z],
            })
            .collect(),
        frames: dataset
            .frames
            .iter()
            .map(|f| FrameRecord { id: f.id.0, keypoints: f.pose.keypoints().iter().map(|p| [p.x, p.y, p.z]).collect() })
            .collect(),
        splits: Splits {
            train: dataset.train.iter().map(|id| id.0).collect(),
            heldout: dataset.heldout.iter().map(|id| id.0).collect(),
        },
    };
    let mut text = serde_json::to_string_pretty(&file).expect("dataset records always serialize");
    text.push('\n');
    text
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, dataset_to_string(dataset)).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}
