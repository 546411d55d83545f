//! 3D poses, root alignment, pose distance and MKPE.

use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::geometry::Point3;

/// A 3D pose of `K` keypoints in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose3D {
    keypoints: Vec<Point3>,
}

impl Pose3D {
    pub fn new(keypoints: Vec<Point3>) -> Result<Self> {
        if keypoints.is_empty() {
            return Err(Error::InvalidParameter("pose has no keypoints"));
        }
        if keypoints.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("pose has non-finite coordinates"));
        }
        Ok(Self { keypoints })
    }

    /// Unchecked constructor for points produced inside the crate.
    pub(crate) fn from_points(keypoints: Vec<Point3>) -> Self {
        Self { keypoints }
    }

    pub fn keypoints(&self) -> &[Point3] {
        &self.keypoints
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }
}

/// A pose translated so that its root keypoint sits at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPose {
    keypoints: Vec<Point3>,
    root_index: usize,
}

impl AlignedPose {
    pub fn keypoints(&self) -> &[Point3] {
        &self.keypoints
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    /// Keypoints flattened to a `3K` vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.keypoints.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }
}

pub fn align_root(pose: &Pose3D, root_index: usize) -> Result<AlignedPose> {
    let root = *pose
        .keypoints
        .get(root_index)
        .ok_or(Error::IndexOutOfRange { index: root_index, len: pose.len() })?;
    let mut keypoints: Vec<Point3> = pose.keypoints.iter().map(|p| Point3::from(p - root)).collect();
    keypoints[root_index] = Point3::origin();
    Ok(AlignedPose { keypoints, root_index })
}

fn mean_keypoint_distance(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).sum::<f64>() / a.len() as f64
}

/// Mean Euclidean distance between corresponding keypoints, mm.
pub fn pose_distance(a: &AlignedPose, b: &AlignedPose) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(mean_keypoint_distance(&a.keypoints, &b.keypoints))
}

/// Mean keypoint position error over all frames and keypoints, in world
/// coordinates (no alignment), mm.
pub fn mkpe(predicted: &[Pose3D], truth: &[Pose3D]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidParameter("mkpe needs at least one frame"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), got: p.len() });
        }
        sum += p.keypoints.iter().zip(&t.keypoints).map(|(a, b)| (a - b).norm()).sum::<f64>();
        count += t.len();
    }
    Ok(sum / count as f64)
}
