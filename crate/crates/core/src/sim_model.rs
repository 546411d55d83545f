//! Synthetic stand-in for a trained 2D keypoint detector.
//!
//! The simulated detector has no weights. Its error for a frame is a function
//! of how well the current training pool covers that frame's pose:
//!
//! ```text
//! d     = min over pooled poses of pose_distance(frame pose, pooled pose)
//! sigma = sigma_floor + sigma_base · (1 + d / coverage_scale) · fraction^(−pool_exponent)
//! p_out = min(1, outlier_prob_base · (1 + d / coverage_scale))
//! ```
//!
//! Each (view, keypoint) prediction is the ground-truth projection plus
//! isotropic Gaussian noise of std `sigma`, or, with probability `p_out`, the
//! projection displaced by `outlier_offset_px` in a random direction. Outliers
//! are drawn independently per view, which is what makes cross-view
//! consistency informative. Heatmaps are rendered at the prediction, with an
//! optional half-amplitude distractor peak.
//!
//! Coupling error to pose coverage is the central modeling assumption: adding
//! diverse poses to the pool reduces error on similar frames, which gives
//! coverage- and consistency-driven selection something real to exploit.
//!
//! All randomness is drawn from counter-based streams keyed by
//! `(seed, frame, view, keypoint, iteration)`.

use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Frame;
use crate::error::{Error, Result};
use crate::geometry::{CameraParams, Point2};
use crate::heatmap::{Heatmap, ImageGrid};
use crate::pose::{align_root, pose_distance, AlignedPose};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_base_px: f64,
    pub sigma_floor_px: f64,
    pub coverage_scale_mm: f64,
    pub pool_exponent: f64,
    pub outlier_prob_base: f64,
    pub outlier_offset_px: f64,
    pub multi_peak_prob: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_base_px: 0.3,
            sigma_floor_px: 0.2,
            coverage_scale_mm: 30.0,
            pool_exponent: 0.25,
            outlier_prob_base: 0.005,
            outlier_offset_px: 60.0,
            multi_peak_prob: 0.1,
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// A detector that reproduces ground truth exactly.
    pub fn noise_free() -> Self {
        Self { sigma_base_px: 0.0, sigma_floor_px: 0.0, outlier_prob_base: 0.0, multi_peak_prob: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sigma_base_px,
            self.sigma_floor_px,
            self.coverage_scale_mm,
            self.pool_exponent,
            self.outlier_offset_px,
        ];
        if finite.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("noise parameters must be finite and non-negative"));
        }
        if !(self.coverage_scale_mm > 0.0) {
            return Err(Error::InvalidParameter("coverage_scale_mm must be positive"));
        }
        for p in [self.outlier_prob_base, self.multi_peak_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter("probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Prediction noise std for coverage distance `d` mm and pool fraction.
    pub fn sigma(&self, d: f64, labeled_fraction: f64) -> f64 {
        self.sigma_floor_px
            + self.sigma_base_px * (1.0 + d / self.coverage_scale_mm) * labeled_fraction.powf(-self.pool_exponent)
    }

    pub fn outlier_prob(&self, d: f64) -> f64 {
        (self.outlier_prob_base * (1.0 + d / self.coverage_scale_mm)).min(1.0)
    }
}

/// What the simulated detector was "trained" on.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSummary {
    poses: Vec<AlignedPose>,
    labeled_fraction: f64,
}

impl PoolSummary {
    pub fn poses(&self) -> &[AlignedPose] {
        &self.poses
    }

    pub fn labeled_fraction(&self) -> f64 {
        self.labeled_fraction
    }

    pub fn root_index(&self) -> usize {
        self.poses[0].root_index()
    }

    /// Distance from `pose` to the nearest pooled pose, mm.
    pub fn coverage_distance(&self, pose: &AlignedPose) -> Result<f64> {
        let mut best = f64::INFINITY;
        for p in &self.poses {
            best = best.min(pose_distance(pose, p)?);
        }
        Ok(best)
    }
}

/// Summarizes the training pool from its aligned poses. `total_count` is the
/// size of the training split.
pub fn summarize_pool(labeled: Vec<AlignedPose>, total_count: usize) -> Result<PoolSummary> {
    if labeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    if labeled.len() > total_count {
        return Err(Error::InvalidParameter("pool is larger than the training split"));
    }
    let root = labeled[0].root_index();
    if labeled.iter().any(|p| p.root_index() != root) {
        return Err(Error::InvalidParameter("pooled poses use different root keypoints"));
    }
    let labeled_fraction = labeled.len() as f64 / total_count as f64;
    Ok(PoolSummary { poses: labeled, labeled_fraction })
}

/// Simulated detector output for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePrediction {
    /// `[view][keypoint]` 2D predictions, px.
    pub points: Vec<Vec<Point2>>,
    /// `[view][keypoint]` heatmaps, when rendering was requested.
    pub heatmaps: Option<Vec<Vec<Heatmap>>>,
    pub coverage_distance_mm: f64,
    pub sigma_px: f64,
}

/// Runs the simulated detector on every view of `frame`.
///
/// Pass `grid` to also render heatmaps; the predicted points are identical
/// either way.
pub fn infer(
    frame: &Frame,
    cameras: &[CameraParams],
    summary: &PoolSummary,
    model: &NoiseModel,
    iteration: u64,
    grid: Option<&ImageGrid>,
) -> Result<FramePrediction> {
    let aligned = align_root(&frame.pose, summary.root_index())?;
    let d = summary.coverage_distance(&aligned)?;
    let sigma = model.sigma(d, summary.labeled_fraction);
    let p_out = model.outlier_prob(d);
    let truth = frame.projections(cameras)?;

    let mut points = Vec::with_capacity(cameras.len());
    let mut heatmaps = grid.map(|_| Vec::with_capacity(cameras.len()));
    for (view, gt_view) in truth.iter().enumerate() {
        let mut view_points = Vec::with_capacity(gt_view.len());
        let mut view_maps = Vec::new();
        for (kp, gt) in gt_view.iter().enumerate() {
            let mut rng = stream(&[domain::INFERENCE, model.seed, frame.id.0, view as u64, kp as u64, iteration]);
            // fixed draw order so every branch consumes the same stream
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let outlier_u: f64 = rng.random();
            let angle = core::f64::consts::TAU * rng.random::<f64>();
            let multi_u: f64 = rng.random();
            let du: f64 = rng.random();
            let dv: f64 = rng.random();

            let prediction = if outlier_u < p_out {
                Point2::new(gt.x + model.outlier_offset_px * angle.cos(), gt.y + model.outlier_offset_px * angle.sin())
            } else {
                Point2::new(gt.x + sigma * nx, gt.y + sigma * ny)
            };
            if let Some(grid) = grid {
                let mut h = grid.render(&prediction);
                if multi_u < model.multi_peak_prob {
                    let distractor = Point2::new(du * grid.config.width as f64, dv * grid.config.height as f64);
                    h.add_gaussian(distractor, grid.config.sigma_px, 0.5);
                }
                view_maps.push(h);
            }
            view_points.push(prediction);
        }
        points.push(view_points);
        if let Some(maps) = heatmaps.as_mut() {
            maps.push(view_maps);
        }
    }
    Ok(FramePrediction { points, heatmaps, coverage_distance_mm: d, sigma_px: sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FrameId;
    use crate::geometry::Point3;
    use crate::heatmap::HeatmapConfig;
    use crate::pose::Pose3D;
    use alloc::vec;
    use nalgebra::{Matrix3, Vector3};

    fn rig() -> Vec<CameraParams> {
        let k = Matrix3::new(1000.0, 0.0, 500.0, 0.0, 1000.0, 500.0, 0.0, 0.0, 1.0);
        (0..4)
            .map(|i| {
                let a = core::f64::consts::TAU * i as f64 / 4.0;
                let eye = Point3::new(3000.0 * a.cos(), 3000.0 * a.sin(), 0.0);
                CameraParams::look_at(i, k, eye, Point3::origin(), Vector3::z()).unwrap()
            })
            .collect()
    }

    fn frame() -> Frame {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(100.0, 0.0, 300.0), Point3::new(-80.0, 40.0, -400.0)];
        Frame { id: FrameId(7), pose: Pose3D::new(pts).unwrap() }
    }

    fn summary_of(f: &Frame, total: usize) -> PoolSummary {
        summarize_pool(vec![align_root(&f.pose, 0).unwrap()], total).unwrap()
    }

    #[test]
    fn summarize_examples() {
        let f = frame();
        let aligned = align_root(&f.pose, 0).unwrap();
        let s = summarize_pool(vec![aligned.clone(); 200], 5008).unwrap();
        assert!((s.labeled_fraction() - 0.03994).abs() < 1e-5);
        assert_eq!(summarize_pool(vec![aligned; 3], 3).unwrap().labeled_fraction(), 1.0);
        assert_eq!(summarize_pool(vec![], 10), Err(Error::EmptyPool));
    }

    #[test]
    fn noise_free_model_is_exact() {
        let f = frame();
        let cams = rig();
        let out = infer(&f, &cams, &summary_of(&f, 10), &NoiseModel::noise_free(), 3, None).unwrap();
        assert_eq!(out.points, f.projections(&cams).unwrap());
        assert!(out.heatmaps.is_none());
    }

    #[test]
    fn covered_frame_sigma() {
        let f = frame();
        let model = NoiseModel::default();
        let out = infer(&f, &rig(), &summary_of(&f, 1), &model, 0, None).unwrap();
        assert_eq!(out.coverage_distance_mm, 0.0);
        assert_eq!(out.sigma_px, model.sigma_floor_px + model.sigma_base_px);
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let f = frame();
        let cams = rig();
        let grid = ImageGrid::new(HeatmapConfig::default(), 1000.0, 1000.0).unwrap();
        let model = NoiseModel { multi_peak_prob: 0.5, outlier_prob_base: 0.3, ..Default::default() };
        let a = infer(&f, &cams, &summary_of(&f, 20), &model, 2, Some(&grid)).unwrap();
        let b = infer(&f, &cams, &summary_of(&f, 20), &model, 2, Some(&grid)).unwrap();
        assert_eq!(a, b);
        let c = infer(&f, &cams, &summary_of(&f, 20), &model, 2, None).unwrap();
        assert_eq!(a.points, c.points);
        let d = infer(&f, &cams, &summary_of(&f, 20), &model, 3, None).unwrap();
        assert_ne!(a.points, d.points);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(NoiseModel { multi_peak_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(NoiseModel { coverage_scale_mm: 0.0, ..Default::default() }.validate().is_err());
        assert!(NoiseModel { sigma_base_px: f64::NAN, ..Default::default() }.validate().is_err());
        assert!(NoiseModel::noise_free().validate().is_ok());
    }
}
