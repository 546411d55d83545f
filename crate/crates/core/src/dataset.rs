//! Frames, camera rigs and train/held-out splits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, CameraParams, Point2};
use crate::pose::Pose3D;

/// Identifier of one frame (time instance) in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(pub u64);

impl core::fmt::Display for FrameId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One synchronized capture: the ground-truth pose seen by every camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: FrameId,
    pub pose: Pose3D,
}

impl Frame {
    /// Ground-truth 2D keypoints, indexed `[view][keypoint]`.
    pub fn projections(&self, cameras: &[CameraParams]) -> Result<Vec<Vec<Point2>>> {
        cameras
            .iter()
            .map(|c| self.pose.keypoints().iter().map(|p| project(c, p)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cameras: Vec<CameraParams>,
    pub frames: Vec<Frame>,
    pub train: Vec<FrameId>,
    pub heldout: Vec<FrameId>,
    pub keypoints: usize,
    pub image_width: f64,
    pub image_height: f64,
    index: BTreeMap<FrameId, usize>,
}

impl Dataset {
    /// Builds a dataset and checks its invariants: unique frame ids, disjoint
    /// splits referencing known frames, and `keypoints` entries per pose.
    pub fn new(
        cameras: Vec<CameraParams>,
        frames: Vec<Frame>,
        train: Vec<FrameId>,
        heldout: Vec<FrameId>,
        image_width: f64,
        image_height: f64,
    ) -> Result<Self> {
        if cameras.len() < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 cameras, got {}", cameras.len())));
        }
        let mut ids = BTreeSet::new();
        for c in &cameras {
            if !ids.insert(c.id()) {
                return Err(Error::InvalidDataset(format!("duplicate camera id {}", c.id())));
            }
        }
        let keypoints = frames.first().map_or(0, |f| f.pose.len());
        if keypoints == 0 {
            return Err(Error::InvalidDataset("dataset has no frames".into()));
        }
        let mut index = BTreeMap::new();
        for (i, f) in frames.iter().enumerate() {
            if index.insert(f.id, i).is_some() {
                return Err(Error::InvalidDataset(format!("duplicate frame id {}", f.id)));
            }
            if f.pose.len() != keypoints {
                return Err(Error::InvalidDataset(format!(
                    "frame {} has {} keypoints, expected {keypoints}",
                    f.id,
                    f.pose.len()
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for id in train.iter().chain(&heldout) {
            if !index.contains_key(id) {
                return Err(Error::InvalidDataset(format!("split references unknown frame {id}")));
            }
            if !seen.insert(*id) {
                return Err(Error::InvalidDataset(format!("frame {id} appears twice in the splits")));
            }
        }
        if !(image_width > 0.0 && image_height > 0.0) {
            return Err(Error::InvalidDataset("image size must be positive".into()));
        }
        Ok(Self { cameras, frames, train, heldout, keypoints, image_width, image_height, index })
    }

    pub fn frame(&self, id: FrameId) -> Option<&Frame> {
        self.index.get(&id).map(|&i| &self.frames[i])
    }

    pub fn views(&self) -> usize {
        self.cameras.len()
    }

    pub fn image_diagonal_sq(&self) -> f64 {
        self.image_width * self.image_width + self.image_height * self.image_height
    }
}
