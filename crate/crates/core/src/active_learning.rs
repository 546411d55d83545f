//! Frame-level acquisition scores and the greedy batch selection loop.
//!
//! Every strategy is expressed as "pick the frame with the largest score",
//! so the best-vs-second-best margin is negated: small margins (uncertain
//! frames) score highest.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::FrameId;
use crate::error::{Error, Result};
use crate::geometry::FrameTriangulation;
use crate::heatmap::{bsb_view, mpe_view, Heatmap, PeakParams};
use crate::pose::{pose_distance, AlignedPose};
use crate::rng::{domain, hash_key};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rand,
    Bsb,
    Mpe,
    Coreset,
    Mvc,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Rand, Strategy::Bsb, Strategy::Mpe, Strategy::Coreset, Strategy::Mvc];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rand => "rand",
            Strategy::Bsb => "bsb",
            Strategy::Mpe => "mpe",
            Strategy::Coreset => "coreset",
            Strategy::Mvc => "mvc",
        }
    }

    /// Whether the strategy scores frames from heatmaps.
    pub fn needs_heatmaps(self) -> bool {
        matches!(self, Strategy::Bsb | Strategy::Mpe)
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or(Error::InvalidParameter("unknown strategy (expected rand|bsb|mpe|coreset|mvc)"))
    }
}

/// Acquisition value of one frame; higher is selected sooner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub frame: FrameId,
    pub strategy: Strategy,
    pub value: f64,
}

fn checked(frame: FrameId, strategy: Strategy, value: f64) -> Result<FrameScore> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter("frame score is not finite"));
    }
    Ok(FrameScore { frame, strategy, value })
}

fn views_mean<F>(views: &[Vec<Heatmap>], peaks: &PeakParams, per_view: F) -> Result<f64>
where
    F: Fn(&[Heatmap], &PeakParams) -> Result<f64>,
{
    if views.is_empty() {
        return Err(Error::InsufficientViews(0));
    }
    let mut sum = 0.0;
    for v in views {
        sum += per_view(v, peaks)?;
    }
    Ok(sum / views.len() as f64)
}

/// Negated mean best-vs-second-best margin over views; in `[-1, 0]`.
pub fn score_bsb(frame: FrameId, heatmaps: &[Vec<Heatmap>], peaks: &PeakParams) -> Result<FrameScore> {
    checked(frame, Strategy::Bsb, -views_mean(heatmaps, peaks, bsb_view)?)
}

/// Mean multiple-peak entropy over views.
pub fn score_mpe(frame: FrameId, heatmaps: &[Vec<Heatmap>], peaks: &PeakParams) -> Result<FrameScore> {
    checked(frame, Strategy::Mpe, views_mean(heatmaps, peaks, mpe_view)?)
}

/// Multi-view consistency: the frame's triangulation error.
pub fn score_mc(frame: FrameId, triangulation: &FrameTriangulation) -> Result<FrameScore> {
    checked(frame, Strategy::Mvc, triangulation.epsilon)
}

/// Distance from the candidate pose to the nearest labeled pose.
pub fn score_cs(frame: FrameId, candidate: &AlignedPose, labeled: &[AlignedPose]) -> Result<FrameScore> {
    if labeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut best = f64::INFINITY;
    for l in labeled {
        best = best.min(pose_distance(candidate, l)?);
    }
    checked(frame, Strategy::Coreset, best)
}

/// Labeled, unlabeled and pseudo-labeled frame sets of the training split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PoolState {
    pub labeled: BTreeSet<FrameId>,
    pub unlabeled: BTreeSet<FrameId>,
    pub pseudo: BTreeSet<FrameId>,
    pub iteration: usize,
}

impl PoolState {
    pub fn new(all: impl IntoIterator<Item = FrameId>, labeled: impl IntoIterator<Item = FrameId>) -> Result<Self> {
        let mut unlabeled: BTreeSet<FrameId> = all.into_iter().collect();
        let labeled: BTreeSet<FrameId> = labeled.into_iter().collect();
        for id in &labeled {
            if !unlabeled.remove(id) {
                return Err(Error::InvalidParameter("initial labeled frame is not in the pool"));
            }
        }
        Ok(Self { labeled, unlabeled, pseudo: BTreeSet::new(), iteration: 0 })
    }

    /// Frames that may be sent for annotation: unlabeled and not pseudo-labeled.
    pub fn candidates(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.unlabeled.iter().copied().filter(|id| !self.pseudo.contains(id))
    }

    /// Moves annotated frames from the unlabeled to the labeled side.
    pub fn annotate(&mut self, frames: &[FrameId]) -> Result<()> {
        for id in frames {
            if !self.unlabeled.remove(id) {
                return Err(Error::InvalidParameter("annotated frame is not unlabeled"));
            }
            self.pseudo.remove(id);
            self.labeled.insert(*id);
        }
        Ok(())
    }

    pub fn set_pseudo(&mut self, pseudo: BTreeSet<FrameId>) -> Result<()> {
        if !pseudo.is_subset(&self.unlabeled) {
            return Err(Error::InvalidParameter("pseudo-labeled frames must be unlabeled"));
        }
        self.pseudo = pseudo;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    /// Checks disjointness and `pseudo ⊆ unlabeled`.
    pub fn check_invariants(&self) -> bool {
        self.labeled.is_disjoint(&self.unlabeled) && self.pseudo.is_subset(&self.unlabeled)
    }
}

/// Per-frame evidence consumed by [`select_batch`].
#[derive(Debug, Clone, Default)]
pub struct SelectionInputs {
    /// Scores for the static strategies (BSB, MPE, MVC).
    pub scores: BTreeMap<FrameId, f64>,
    /// Predicted aligned poses of candidate frames (CoreSet).
    pub candidate_poses: BTreeMap<FrameId, AlignedPose>,
    /// Aligned poses of the labeled set (CoreSet).
    pub labeled_poses: Vec<AlignedPose>,
    /// Key of the random stream used by `Rand`.
    pub rand_key: u64,
}

/// Chooses `budget` frames to annotate, in pick order.
pub fn select_batch(
    strategy: Strategy,
    pool: &PoolState,
    budget: usize,
    inputs: &SelectionInputs,
) -> Result<Vec<FrameId>> {
    let candidates: Vec<FrameId> = pool.candidates().collect();
    if budget > candidates.len() {
        return Err(Error::BudgetExceedsPool { budget, available: candidates.len() });
    }
    match strategy {
        Strategy::Rand => Ok(random_batch(&candidates, budget, inputs.rand_key)),
        Strategy::Bsb | Strategy::Mpe | Strategy::Mvc => {
            let mut scored = Vec::with_capacity(candidates.len());
            for id in candidates {
                let value = *inputs.scores.get(&id).ok_or(Error::InvalidParameter("candidate frame has no score"))?;
                if !value.is_finite() {
                    return Err(Error::InvalidParameter("frame score is not finite"));
                }
                scored.push((id, value));
            }
            Ok(top_by_score(scored, budget))
        }
        Strategy::Coreset => greedy_k_center(&candidates, budget, inputs),
    }
}

/// Uniform sample without replacement: every candidate gets a hashed priority
/// and the `budget` smallest win. Priorities depend only on the key and the
/// frame id, so excluding a frame never reshuffles the others.
fn random_batch(candidates: &[FrameId], budget: usize, key: u64) -> Vec<FrameId> {
    let mut keyed: Vec<(u64, FrameId)> =
        candidates.iter().map(|&id| (hash_key(&[domain::RANDOM_SELECTION, key, id.0]), id)).collect();
    keyed.sort_unstable();
    keyed.into_iter().take(budget).map(|(_, id)| id).collect()
}

fn top_by_score(mut scored: Vec<(FrameId, f64)>, budget: usize) -> Vec<FrameId> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.into_iter().take(budget).map(|(id, _)| id).collect()
}

/// Farthest-first traversal from the labeled set, maintaining each
/// candidate's distance to its nearest chosen center.
fn greedy_k_center(candidates: &[FrameId], budget: usize, inputs: &SelectionInputs) -> Result<Vec<FrameId>> {
    if inputs.labeled_poses.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut remaining: Vec<(FrameId, &AlignedPose, f64)> = Vec::with_capacity(candidates.len());
    for &id in candidates {
        let pose = inputs
            .candidate_poses
            .get(&id)
            .ok_or(Error::InvalidParameter("candidate frame has no predicted pose"))?;
        let d = score_cs(id, pose, &inputs.labeled_poses)?.value;
        remaining.push((id, pose, d));
    }

    let mut picked = Vec::with_capacity(budget);
    for _ in 0..budget {
        // candidates are in ascending id order, so the first maximum wins ties
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, r)| if r.2 > bd { (i, r.2) } else { (bi, bd) });
        let (id, center, _) = remaining.remove(pos);
        picked.push(id);
        for r in remaining.iter_mut() {
            r.2 = r.2.min(pose_distance(r.1, center)?);
        }
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point2, Point3};
    use crate::heatmap::render_gaussian;
    use crate::pose::{align_root, Pose3D};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn ids(v: &[u64]) -> Vec<FrameId> {
        v.iter().map(|&i| FrameId(i)).collect()
    }

    fn line_pose(x: f64) -> AlignedPose {
        align_root(&Pose3D::new(vec![Point3::origin(), Point3::new(x, 0.0, 0.0)]).unwrap(), 0).unwrap()
    }

    fn single() -> Heatmap {
        render_gaussian(Point2::new(10.0, 10.0), 2.0, 32, 32).unwrap()
    }

    fn double() -> Heatmap {
        let mut h = single();
        h.add_gaussian(Point2::new(24.0, 20.0), 2.0, 1.0);
        h
    }

    #[test]
    fn bsb_frame_scores() {
        let p = PeakParams::default();
        assert_relative_eq!(score_bsb(FrameId(0), &[vec![single()], vec![single()]], &p).unwrap().value, -1.0);
        assert_relative_eq!(
            score_bsb(FrameId(0), &[vec![double()], vec![double()]], &p).unwrap().value,
            0.0,
            epsilon = 1e-12
        );
        // view margins 0.4 and 0.2
        let mut a = single();
        a.add_gaussian(Point2::new(24.0, 20.0), 2.0, 0.6);
        let mut b = single();
        b.add_gaussian(Point2::new(24.0, 20.0), 2.0, 0.8);
        assert_relative_eq!(score_bsb(FrameId(0), &[vec![a], vec![b]], &p).unwrap().value, -0.3, epsilon = 1e-9);
    }

    #[test]
    fn mpe_frame_scores() {
        let p = PeakParams::default();
        assert_eq!(score_mpe(FrameId(0), &[vec![single()], vec![single()]], &p).unwrap().value, 0.0);
        let two = score_mpe(FrameId(0), &[vec![double()], vec![double()]], &p).unwrap().value;
        assert_relative_eq!(two, core::f64::consts::LN_2, epsilon = 1e-9);
        let mixed = score_mpe(FrameId(0), &[vec![double()], vec![single()]], &p).unwrap().value;
        assert_relative_eq!(mixed, 0.3466, epsilon = 1e-4);
    }

    #[test]
    fn cs_scores() {
        let c = line_pose(0.0);
        assert_eq!(score_cs(FrameId(1), &c, &[c.clone()]).unwrap().value, 0.0);
        // pose distance averages over both keypoints, so x offsets are doubled
        let s = score_cs(FrameId(1), &c, &[line_pose(10.0), line_pose(24.0)]).unwrap();
        assert_relative_eq!(s.value, 5.0);
        assert_eq!(score_cs(FrameId(1), &c, &[]), Err(Error::EmptyPool));
    }

    #[test]
    fn mc_is_passthrough() {
        let ft = FrameTriangulation { per_keypoint: vec![], epsilon: 10.0, inlier_count: 2 };
        assert_eq!(score_mc(FrameId(3), &ft).unwrap().value, 10.0);
    }

    #[test]
    fn coreset_picks_farthest_on_a_line() {
        let pool = PoolState::new(ids(&[0, 1, 2, 3]), ids(&[0])).unwrap();
        let mut inputs = SelectionInputs { labeled_poses: vec![line_pose(0.0)], ..Default::default() };
        for (id, x) in [(1u64, 1.0), (2, 2.0), (3, 10.0)] {
            inputs.candidate_poses.insert(FrameId(id), line_pose(x));
        }
        assert_eq!(select_batch(Strategy::Coreset, &pool, 1, &inputs).unwrap(), ids(&[3]));
        assert_eq!(select_batch(Strategy::Coreset, &pool, 2, &inputs).unwrap(), ids(&[3, 2]));
    }

    #[test]
    fn static_selection_breaks_ties_by_id() {
        let pool = PoolState::new(ids(&[0, 1, 2, 3, 4]), ids(&[0])).unwrap();
        let mut inputs = SelectionInputs::default();
        for (id, s) in [(1u64, 0.5), (2, 0.9), (3, 0.5), (4, 0.1)] {
            inputs.scores.insert(FrameId(id), s);
        }
        assert_eq!(select_batch(Strategy::Mvc, &pool, 3, &inputs).unwrap(), ids(&[2, 1, 3]));
    }

    #[test]
    fn pseudo_frames_are_not_candidates() {
        let mut pool = PoolState::new(ids(&[0, 1, 2, 3]), ids(&[0])).unwrap();
        pool.set_pseudo(ids(&[2]).into_iter().collect()).unwrap();
        let inputs = SelectionInputs { rand_key: 9, ..Default::default() };
        let batch = select_batch(Strategy::Rand, &pool, 2, &inputs).unwrap();
        assert!(!batch.contains(&FrameId(2)));
        assert_eq!(
            select_batch(Strategy::Rand, &pool, 3, &inputs),
            Err(Error::BudgetExceedsPool { budget: 3, available: 2 })
        );
    }

    #[test]
    fn rand_is_seeded() {
        let pool = PoolState::new(ids(&(0..50).collect::<Vec<_>>()), ids(&[0])).unwrap();
        let a = SelectionInputs { rand_key: 1, ..Default::default() };
        let b = SelectionInputs { rand_key: 2, ..Default::default() };
        let first = select_batch(Strategy::Rand, &pool, 10, &a).unwrap();
        assert_eq!(first, select_batch(Strategy::Rand, &pool, 10, &a).unwrap());
        assert_ne!(first, select_batch(Strategy::Rand, &pool, 10, &b).unwrap());
    }

    #[test]
    fn pool_state_transitions() {
        let mut pool = PoolState::new(ids(&[0, 1, 2]), ids(&[0])).unwrap();
        pool.set_pseudo(ids(&[1]).into_iter().collect()).unwrap();
        pool.annotate(&ids(&[2])).unwrap();
        assert!(pool.check_invariants());
        assert!(pool.annotate(&ids(&[0])).is_err());
        assert!(pool.set_pseudo(ids(&[0]).into_iter().collect()).is_err());
        assert!(PoolState::new(ids(&[0]), ids(&[5])).is_err());
        assert_eq!(pool.total(), 3);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("random".parse::<Strategy>().is_err());
    }
}
