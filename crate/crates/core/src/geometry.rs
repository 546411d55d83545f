//! Pinhole cameras, linear and robust triangulation, and epipolar distance.

use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::Pose3D;

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;

const ORTHONORMAL_TOL: f64 = 1e-9;
const MIN_DEPTH: f64 = 1e-9;
const ILL_CONDITIONED_RATIO: f64 = 0.99;

/// A calibrated pinhole camera: `x ~ K [R | t] X`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraParams {
    id: usize,
    intrinsics: Matrix3<f64>,
    intrinsics_inv: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    projection: Matrix3x4<f64>,
}

impl CameraParams {
    pub fn new(
        id: usize,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        if intrinsics.iter().chain(rotation.iter()).chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCamera("non-finite parameter"));
        }
        if (0..3).any(|i| intrinsics[(i, i)] <= 0.0) {
            return Err(Error::InvalidCamera("intrinsics diagonal must be strictly positive"));
        }
        if intrinsics[(1, 0)] != 0.0 || intrinsics[(2, 0)] != 0.0 || intrinsics[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics must be upper triangular"));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL || (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera("rotation is not a proper orthonormal matrix"));
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .ok_or(Error::InvalidCamera("intrinsics are singular"))?;
        let mut extrinsics = Matrix3x4::zeros();
        extrinsics.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        extrinsics.set_column(3, &translation);
        Ok(Self {
            id,
            intrinsics,
            intrinsics_inv,
            rotation,
            translation,
            projection: intrinsics * extrinsics,
        })
    }

    /// Camera at `eye` whose optical axis passes through `target`; image y
    /// points along `-up`.
    pub fn look_at(
        id: usize,
        intrinsics: Matrix3<f64>,
        eye: Point3,
        target: Point3,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or(Error::InvalidCamera("eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or(Error::InvalidCamera("up vector is parallel to the optical axis"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        Self::new(id, intrinsics, rotation, translation)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn projection(&self) -> &Matrix3x4<f64> {
        &self.projection
    }

    /// Optical center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Depth of `p` along the optical axis (third homogeneous coordinate
    /// before the intrinsics scale).
    pub fn depth(&self, p: &Point3) -> f64 {
        (self.projection * p.to_homogeneous()).z
    }
}

/// Projects a world point into the image of `camera`.
pub fn project(camera: &CameraParams, p: &Point3) -> Result<Point2> {
    let h = camera.projection * p.to_homogeneous();
    if h.z.abs() <= MIN_DEPTH {
        return Err(Error::DegenerateProjection);
    }
    Ok(Point2::new(h.x / h.z, h.y / h.z))
}

/// Linear (DLT) triangulation from two or more calibrated observations.
///
/// Image points are mapped through `K⁻¹` and the world frame is re-centered on
/// the camera centers before the 2-rows-per-view system is solved by SVD, so
/// the system is well scaled regardless of pixel or millimeter magnitudes.
pub fn triangulate_dlt(observations: &[(&CameraParams, Point2)]) -> Result<Point3> {
    let n = observations.len();
    if n < 2 {
        return Err(Error::InsufficientViews(n));
    }

    let centers: Vec<Vector3<f64>> = observations.iter().map(|(c, _)| c.center().coords).collect();
    let centroid = centers.iter().sum::<Vector3<f64>>() / n as f64;
    let mut scale = centers.iter().map(|c| (c - centroid).norm()).sum::<f64>() / n as f64;
    if !(scale > 1e-12) {
        scale = 1.0;
    }

    let mut a = DMatrix::<f64>::zeros(2 * n, 4);
    for (row, (camera, point)) in observations.iter().enumerate() {
        let ray = camera.intrinsics_inv * Vector3::new(point.x, point.y, 1.0);
        let (x, y) = (ray.x / ray.z, ray.y / ray.z);
        let offset = (camera.rotation * centroid + camera.translation) / scale;
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&camera.rotation);
        m.set_column(3, &offset);
        let r0 = m.row(2) * x - m.row(0);
        let r1 = m.row(2) * y - m.row(1);
        a.row_mut(2 * row).copy_from(&r0);
        a.row_mut(2 * row + 1).copy_from(&r1);
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(Error::IllConditioned)?;
    let sv = &svd.singular_values;
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second) = (sv[order[0]], sv[order[1]]);
    if !(second > 0.0) || smallest / second > ILL_CONDITIONED_RATIO {
        return Err(Error::IllConditioned);
    }
    let h = v_t.row(order[0]);
    if h[3].abs() <= 1e-12 * h.norm() {
        return Err(Error::IllConditioned);
    }
    let local = Vector3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    let world = centroid + local * scale;
    if world.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned);
    }
    Ok(Point3::from(world))
}

/// Result of robust triangulation for one keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointTriangulation {
    pub point: Point3,
    pub inlier_mask: Vec<bool>,
    /// Mean squared reprojection distance over inlier views, px².
    pub reproj_error_px2: f64,
}

impl KeypointTriangulation {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }
}

fn residual(camera: &CameraParams, point: &Point3, observed: &Point2) -> Option<f64> {
    if camera.depth(point) <= MIN_DEPTH {
        return None;
    }
    project(camera, point).ok().map(|p| (p - observed).norm())
}

fn consensus(cameras: &[CameraParams], points: &[Point2], x: &Point3, threshold_px: f64) -> (Vec<bool>, usize, f64) {
    let mut mask = Vec::with_capacity(cameras.len());
    let mut sum_sq = 0.0;
    let mut count = 0;
    for (camera, observed) in cameras.iter().zip(points) {
        let inlier = match residual(camera, x, observed) {
            Some(d) if d <= threshold_px => {
                sum_sq += d * d;
                count += 1;
                true
            }
            _ => false,
        };
        mask.push(inlier);
    }
    let mean = if count > 0 { sum_sq / count as f64 } else { f64::INFINITY };
    (mask, count, mean)
}

/// Robust triangulation by exhaustive two-view hypotheses.
///
/// Every view pair is triangulated; the hypothesis with the most inliers wins
/// (ties: lower mean inlier error, then earlier pair in lexicographic order)
/// and is refit on its inliers.
pub fn robust_triangulate(
    cameras: &[CameraParams],
    points: &[Point2],
    threshold_px: f64,
) -> Result<KeypointTriangulation> {
    if cameras.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: cameras.len(), got: points.len() });
    }
    let n = cameras.len();
    if n < 2 {
        return Err(Error::InsufficientViews(n));
    }
    if !(threshold_px > 0.0) {
        return Err(Error::InvalidParameter("threshold_px must be positive"));
    }

    let mut best: Option<(Point3, Vec<bool>, usize, f64)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let Ok(x) = triangulate_dlt(&[(&cameras[i], points[i]), (&cameras[j], points[j])]) else {
                continue;
            };
            let (mask, count, mean) = consensus(cameras, points, &x, threshold_px);
            let better = match &best {
                None => true,
                Some((_, _, best_count, best_mean)) => {
                    count > *best_count || (count == *best_count && mean < *best_mean)
                }
            };
            if better {
                best = Some((x, mask, count, mean));
            }
        }
    }

    let (point, mask, count, mean) = best.ok_or(Error::NoConsensus)?;
    if count < 2 {
        return Err(Error::NoConsensus);
    }

    let inliers: Vec<(&CameraParams, Point2)> = cameras
        .iter()
        .zip(points)
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|((c, p), _)| (c, *p))
        .collect();
    if let Ok(refit) = triangulate_dlt(&inliers) {
        let (refit_mask, refit_count, refit_mean) = consensus(cameras, points, &refit, threshold_px);
        if refit_count >= 2 {
            return Ok(KeypointTriangulation { point: refit, inlier_mask: refit_mask, reproj_error_px2: refit_mean });
        }
    }
    Ok(KeypointTriangulation { point, inlier_mask: mask, reproj_error_px2: mean })
}

/// How per-view residuals enter the frame consistency error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McError {
    /// `‖l − l̂‖²`, px².
    #[default]
    Squared,
    /// `‖l − l̂‖`, px.
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangulationConfig {
    pub threshold_px: f64,
    pub mc_error: McError,
    /// Squared residual charged to every view of a keypoint that failed to
    /// triangulate, px².
    pub failure_penalty_px2: f64,
}

impl TriangulationConfig {
    /// Defaults with the failure penalty set to the squared image diagonal.
    pub fn for_image(width: f64, height: f64) -> Self {
        Self { failure_penalty_px2: width * width + height * height, ..Self::default() }
    }

    fn term(&self, distance: f64) -> f64 {
        match self.mc_error {
            McError::Squared => distance * distance,
            McError::Euclidean => distance,
        }
    }

    fn penalty_term(&self) -> f64 {
        match self.mc_error {
            McError::Squared => self.failure_penalty_px2,
            McError::Euclidean => self.failure_penalty_px2.sqrt(),
        }
    }
}

impl Default for TriangulationConfig {
    fn default() -> Self {
        Self { threshold_px: 5.0, mc_error: McError::Squared, failure_penalty_px2: 2.0e6 }
    }
}

/// Robust triangulation of every keypoint of a frame plus the frame-level
/// consistency error `epsilon` and inlier count.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTriangulation {
    pub per_keypoint: Vec<KeypointTriangulation>,
    /// Mean per-view residual term over all views and keypoints, outliers
    /// included.
    pub epsilon: f64,
    /// Minimum over keypoints of the number of inlier views.
    pub inlier_count: usize,
}

impl FrameTriangulation {
    pub fn pose(&self) -> Pose3D {
        Pose3D::from_points(self.per_keypoint.iter().map(|k| k.point).collect())
    }

    /// True when every view of every keypoint is an inlier.
    pub fn all_inliers(&self, views: usize) -> bool {
        self.inlier_count == views
    }
}

/// Mean of a `views × keypoints` residual table.
fn mean_residual(terms: &[f64], views: usize, keypoints: usize) -> f64 {
    terms.iter().sum::<f64>() / (views * keypoints) as f64
}

/// Triangulates every keypoint of a frame from `predictions[view][keypoint]`.
///
/// A keypoint without consensus gets an all-outlier mask, a point from plain
/// DLT over all views (origin if that fails too), and the configured penalty
/// for every view.
pub fn frame_triangulate(
    cameras: &[CameraParams],
    predictions: &[Vec<Point2>],
    config: &TriangulationConfig,
) -> Result<FrameTriangulation> {
    let n = cameras.len();
    if predictions.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: predictions.len() });
    }
    if n < 2 {
        return Err(Error::InsufficientViews(n));
    }
    let k = predictions[0].len();
    if let Some(bad) = predictions.iter().find(|p| p.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: bad.len() });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("frame has no keypoints"));
    }

    let mut per_keypoint = Vec::with_capacity(k);
    let mut terms = Vec::with_capacity(n * k);
    let mut inlier_count = usize::MAX;
    let mut observed = Vec::with_capacity(n);
    for kp in 0..k {
        observed.clear();
        observed.extend(predictions.iter().map(|view| view[kp]));
        match robust_triangulate(cameras, &observed, config.threshold_px) {
            Ok(tri) => {
                for (camera, obs) in cameras.iter().zip(&observed) {
                    terms.push(match project(camera, &tri.point) {
                        Ok(p) => config.term((p - obs).norm()),
                        Err(_) => config.penalty_term(),
                    });
                }
                inlier_count = inlier_count.min(tri.inlier_count());
                per_keypoint.push(tri);
            }
            Err(Error::NoConsensus) | Err(Error::IllConditioned) => {
                let all: Vec<(&CameraParams, Point2)> = cameras.iter().zip(observed.iter().copied()).collect();
                let point = triangulate_dlt(&all).unwrap_or_else(|_| Point3::origin());
                terms.extend(core::iter::repeat(config.penalty_term()).take(n));
                inlier_count = 0;
                per_keypoint.push(KeypointTriangulation {
                    point,
                    inlier_mask: alloc::vec![false; n],
                    reproj_error_px2: config.failure_penalty_px2,
                });
            }
            Err(e) => return Err(e),
        }
    }

    Ok(FrameTriangulation { per_keypoint, epsilon: mean_residual(&terms, n, k), inlier_count })
}

/// Fundamental matrix `F` with `x_bᵀ F x_a = 0` for corresponding pixels.
pub fn fundamental_matrix(cam_a: &CameraParams, cam_b: &CameraParams) -> Result<Matrix3<f64>> {
    let (ca, cb) = (cam_a.center(), cam_b.center());
    let reach = 1.0f64.max(ca.coords.norm()).max(cb.coords.norm());
    if (ca - cb).norm() <= 1e-9 * reach {
        return Err(Error::CoincidentCenters);
    }
    let rotation = cam_b.rotation * cam_a.rotation.transpose();
    let t = cam_b.translation - rotation * cam_a.translation;
    let essential = t.cross_matrix() * rotation;
    Ok(cam_b.intrinsics_inv.transpose() * essential * cam_a.intrinsics_inv)
}

fn point_line_distance(line: &Vector3<f64>, p: &Point2) -> f64 {
    let norm = line.x.hypot(line.y);
    if norm == 0.0 {
        return 0.0;
    }
    (line.x * p.x + line.y * p.y + line.z).abs() / norm
}

/// Symmetric epipolar distance: the mean of the distance from `p_b` to the
/// epipolar line of `p_a` and from `p_a` to the epipolar line of `p_b`.
pub fn epipolar_distance(cam_a: &CameraParams, cam_b: &CameraParams, p_a: &Point2, p_b: &Point2) -> Result<f64> {
    let f = fundamental_matrix(cam_a, cam_b)?;
    let xa = p_a.to_homogeneous();
    let xb = p_b.to_homogeneous();
    let d_b = point_line_distance(&(f * xa), p_b);
    let d_a = point_line_distance(&(f.transpose() * xb), p_a);
    Ok(0.5 * (d_a + d_b))
}
