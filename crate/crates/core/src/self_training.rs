//! Pseudo-label selection from confidently triangulated frames.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::FrameId;
use crate::error::{Error, Result};
use crate::geometry::{project, CameraParams, FrameTriangulation};
use crate::heatmap::{Heatmap, ImageGrid};
use crate::pose::{mkpe, Pose3D};
use crate::active_learning::PoolState;

/// How the pseudo-label set evolves across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleVariant {
    /// Fresh set each iteration, excluding last iteration's members.
    #[default]
    Alternating,
    /// Previous set kept and extended with new frames.
    Enlarge,
    /// Fresh set each iteration with no exclusion.
    Constant,
}

/// A frame labeled by its own triangulated prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub frame: FrameId,
    pub pose: Pose3D,
    pub epsilon: f64,
    pub iteration: usize,
}

impl PseudoLabel {
    /// Heatmap targets obtained by reprojecting the triangulated pose.
    pub fn targets(&self, cameras: &[CameraParams], grid: &ImageGrid) -> Result<Vec<Vec<Heatmap>>> {
        render_pose(cameras, &self.pose, grid)
    }
}

/// Ascending-ε scan of unlabeled frames that accepts only frames whose every
/// view of every keypoint is a triangulation inlier.
///
/// `previous` is the pseudo-label set of the last iteration. Under
/// [`ScheduleVariant::Alternating`] its members are skipped, under
/// [`ScheduleVariant::Enlarge`] they are kept (if still unlabeled) and `m` new
/// frames are added, and under [`ScheduleVariant::Constant`] it is ignored.
pub fn select_pseudo_labels(
    pool: &PoolState,
    previous: &BTreeSet<FrameId>,
    m: usize,
    triangulations: &BTreeMap<FrameId, FrameTriangulation>,
    views: usize,
    variant: ScheduleVariant,
) -> BTreeSet<FrameId> {
    let mut ordered: Vec<(f64, FrameId)> = triangulations
        .iter()
        .filter(|(id, _)| pool.unlabeled.contains(id))
        .map(|(id, ft)| (ft.epsilon, *id))
        .collect();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut selected = BTreeSet::new();
    if variant == ScheduleVariant::Enlarge {
        selected.extend(previous.iter().filter(|id| pool.unlabeled.contains(id)).copied());
    }
    let exclude = variant != ScheduleVariant::Constant;
    let mut added = 0;
    for (_, id) in ordered {
        if added == m {
            break;
        }
        if (exclude && previous.contains(&id)) || selected.contains(&id) {
            continue;
        }
        if triangulations[&id].all_inliers(views) {
            selected.insert(id);
            added += 1;
        }
    }
    selected
}

fn render_pose(cameras: &[CameraParams], pose: &Pose3D, grid: &ImageGrid) -> Result<Vec<Vec<Heatmap>>> {
    cameras
        .iter()
        .map(|c| pose.keypoints().iter().map(|p| Ok(grid.render(&project(c, p)?))).collect())
        .collect()
}

/// Per-view heatmap targets for a frame that passed pseudo-label selection.
pub fn make_pseudo_targets(
    cameras: &[CameraParams],
    triangulation: &FrameTriangulation,
    grid: &ImageGrid,
) -> Result<Vec<Vec<Heatmap>>> {
    if !triangulation.all_inliers(cameras.len()) {
        return Err(Error::InvalidParameter("pseudo targets need a frame with all views inlying"));
    }
    render_pose(cameras, &triangulation.pose(), grid)
}

/// Distribution of pseudo-label error against ground truth, mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

/// Per-label MKPE against `truth`, summarized. An empty set gives a summary
/// with `count == 0`.
pub fn drift_stats<'a, F>(labels: &[PseudoLabel], truth: F) -> Result<DriftSummary>
where
    F: Fn(FrameId) -> Option<&'a Pose3D>,
{
    let mut errors = Vec::with_capacity(labels.len());
    for label in labels {
        let gt = truth(label.frame).ok_or(Error::InvalidParameter("pseudo-label has no ground truth"))?;
        errors.push(mkpe(core::slice::from_ref(&label.pose), core::slice::from_ref(gt))?);
    }
    Ok(summarize(&mut errors))
}

/// Count, mean, median and max of per-label errors; sorts `errors` in place.
pub fn summarize(errors: &mut [f64]) -> DriftSummary {
    if errors.is_empty() {
        return DriftSummary::default();
    }
    errors.sort_by(f64::total_cmp);
    let n = errors.len();
    let median = if n % 2 == 1 { errors[n / 2] } else { 0.5 * (errors[n / 2 - 1] + errors[n / 2]) };
    DriftSummary { count: n, mean: errors.iter().sum::<f64>() / n as f64, median, max: errors[n - 1] }
}
