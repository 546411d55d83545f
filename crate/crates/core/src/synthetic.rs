//! Seeded synthetic multi-view datasets.
//!
//! Cameras sit evenly on a horizontal ring and look at the origin. Poses are
//! drawn from a mixture of Gaussian pose clusters around a 15-joint body
//! skeleton, with Zipf mixture weights so a few clusters dominate and the
//! rest form a long tail. Within a cluster, poses vary along a few random
//! joint-space directions (a crude motion manifold) plus small isotropic
//! jitter, so nearby frames really are near each other.

use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Frame, FrameId};
use crate::error::{Error, Result};
use crate::geometry::{CameraParams, Point3};
use crate::pose::Pose3D;
use crate::rng::{domain, stream};

/// Body skeleton in mm, z up, waist (index 2) at the origin: neck, nose,
/// waist, then shoulder/elbow/wrist/hip/knee/ankle for the left and right side.
const SKELETON: [[f64; 3]; 15] = [
    [0.0, 0.0, 500.0],
    [0.0, 60.0, 640.0],
    [0.0, 0.0, 0.0],
    [180.0, 0.0, 480.0],
    [200.0, 0.0, 220.0],
    [210.0, 40.0, -20.0],
    [100.0, 0.0, -20.0],
    [110.0, 20.0, -460.0],
    [110.0, 0.0, -880.0],
    [-180.0, 0.0, 480.0],
    [-200.0, 0.0, 220.0],
    [-210.0, 40.0, -20.0],
    [-100.0, 0.0, -20.0],
    [-110.0, 20.0, -460.0],
    [-110.0, 0.0, -880.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub train_frames: usize,
    pub heldout_frames: usize,
    /// At most 15; the first `keypoints` skeleton joints are used.
    pub keypoints: usize,
    pub cameras: usize,
    pub ring_radius_mm: f64,
    pub camera_height_mm: f64,
    pub focal_px: f64,
    pub image_width: f64,
    pub image_height: f64,
    /// Std of per-joint offsets separating cluster templates, mm.
    pub pose_scale_mm: f64,
    /// Number of latent motion directions per cluster.
    pub latent_dims: usize,
    /// Std of per-joint displacement along one latent direction, mm.
    pub within_cluster_mm: f64,
    /// Std of independent per-joint, per-axis noise, mm.
    pub jitter_mm: f64,
    /// Half-width of the uniform horizontal placement of the subject, mm.
    pub translation_mm: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            clusters: 10,
            train_frames: 500,
            heldout_frames: 100,
            keypoints: 15,
            cameras: 8,
            ring_radius_mm: 3000.0,
            camera_height_mm: 0.0,
            focal_px: 900.0,
            image_width: 1000.0,
            image_height: 1000.0,
            pose_scale_mm: 100.0,
            latent_dims: 2,
            within_cluster_mm: 60.0,
            jitter_mm: 5.0,
            translation_mm: 200.0,
            zipf_exponent: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.train_frames == 0 || self.cameras < 2 {
            return Err(Error::InvalidParameter("need clusters ≥ 1, train_frames ≥ 1, cameras ≥ 2"));
        }
        if self.keypoints == 0 || self.keypoints > SKELETON.len() {
            return Err(Error::InvalidParameter("keypoints must lie in 1..=15"));
        }
        let positive = [self.ring_radius_mm, self.focal_px, self.image_width, self.image_height];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("ring radius, focal length and image size must be positive"));
        }
        let non_negative = [self.pose_scale_mm, self.within_cluster_mm, self.jitter_mm, self.translation_mm, self.zipf_exponent];
        if non_negative.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("scales and zipf exponent must be non-negative"));
        }
        Ok(())
    }
}

fn ring_cameras(spec: &SyntheticSpec) -> Result<Vec<CameraParams>> {
    let k = Matrix3::new(
        spec.focal_px,
        0.0,
        spec.image_width / 2.0,
        0.0,
        spec.focal_px,
        spec.image_height / 2.0,
        0.0,
        0.0,
        1.0,
    );
    (0..spec.cameras)
        .map(|i| {
            let a = core::f64::consts::TAU * i as f64 / spec.cameras as f64;
            let eye = Point3::new(spec.ring_radius_mm * a.cos(), spec.ring_radius_mm * a.sin(), spec.camera_height_mm);
            CameraParams::look_at(i, k, eye, Point3::origin(), Vector3::z())
        })
        .collect()
}

/// Generates a dataset; identical specs give identical datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let cameras = ring_cameras(spec)?;
    let mut rng = stream(&[domain::SYNTHETIC, spec.seed]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut gaussian_joints = |scale: f64, anchor_waist: bool| -> Vec<Vector3<f64>> {
        (0..spec.keypoints)
            .map(|j| {
                // the waist anchors every cluster
                if anchor_waist && j == 2 {
                    Vector3::zeros()
                } else {
                    Vector3::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng)) * scale
                }
            })
            .collect()
    };
    let mut templates = Vec::with_capacity(spec.clusters);
    let mut bases = Vec::with_capacity(spec.clusters);
    for _ in 0..spec.clusters {
        let offsets = gaussian_joints(spec.pose_scale_mm, true);
        let template: Vec<Vector3<f64>> =
            SKELETON.iter().zip(&offsets).map(|(s, o)| Vector3::new(s[0], s[1], s[2]) + o).collect();
        templates.push(template);
        bases.push((0..spec.latent_dims).map(|_| gaussian_joints(spec.within_cluster_mm, true)).collect::<Vec<_>>());
    }

    let weights: Vec<f64> = (0..spec.clusters).map(|c| ((c + 1) as f64).powf(-spec.zipf_exponent)).collect();
    let total_weight: f64 = weights.iter().sum();

    let total = spec.train_frames + spec.heldout_frames;
    let mut frames = Vec::with_capacity(total);
    for id in 0..total {
        let mut target = rng.random::<f64>() * total_weight;
        let mut cluster = spec.clusters - 1;
        for (c, w) in weights.iter().enumerate() {
            if target < *w {
                cluster = c;
                break;
            }
            target -= w;
        }
        let shift = Vector3::new(
            (2.0 * rng.random::<f64>() - 1.0) * spec.translation_mm,
            (2.0 * rng.random::<f64>() - 1.0) * spec.translation_mm,
            0.0,
        );
        let latent: Vec<f64> = (0..spec.latent_dims).map(|_| unit.sample(&mut rng)).collect();
        let keypoints = (0..spec.keypoints)
            .map(|j| {
                let mut p = templates[cluster][j] + shift;
                for (z, basis) in latent.iter().zip(&bases[cluster]) {
                    p += basis[j] * *z;
                }
                let jitter = Vector3::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
                Point3::from(p + jitter * spec.jitter_mm)
            })
            .collect();
        frames.push(Frame { id: FrameId(id as u64), pose: Pose3D::new(keypoints)? });
    }

    let train = (0..spec.train_frames as u64).map(FrameId).collect();
    let heldout = (spec.train_frames as u64..total as u64).map(FrameId).collect();
    Dataset::new(cameras, frames, train, heldout, spec.image_width, spec.image_height)
}
