//! End-to-end annotation campaign: infer → triangulate → pseudo-label →
//! select → annotate → re-summarize → evaluate, once per AL iteration.
//!
//! "Re-training" is modeled by recomputing the [`PoolSummary`] the simulated
//! detector conditions on. Per-frame work goes through an [`Executor`]; all
//! pool mutation happens on the caller's thread, and every random draw is
//! keyed by frame id, so reports do not depend on the executor.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::active_learning::{score_bsb, score_mpe, select_batch, PoolState, SelectionInputs, Strategy};
use crate::analysis::{cluster_entropy, cost_report, kmeans_poses, ClusterModel, CostModel};
use crate::dataset::{Dataset, FrameId};
use crate::error::{Error, Result};
use crate::geometry::{frame_triangulate, FrameTriangulation, McError, TriangulationConfig};
use crate::heatmap::{HeatmapConfig, ImageGrid, PeakParams};
use crate::pose::{align_root, mkpe, AlignedPose, Pose3D};
use crate::rng::{domain, hash_key};
use crate::self_training::{select_pseudo_labels, PseudoLabel, ScheduleVariant};
use crate::sim_model::{infer, summarize_pool, NoiseModel, PoolSummary};

/// Runs independent per-index jobs and returns their results in index order.
pub trait Executor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..len).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainingConfig {
    pub enabled: bool,
    /// Pseudo-labels per iteration as a fraction of `batch_per_iter`.
    pub fraction: f64,
    pub variant: ScheduleVariant,
}

impl Default for SelfTrainingConfig {
    fn default() -> Self {
        Self { enabled: false, fraction: 0.2, variant: ScheduleVariant::Alternating }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Dataset file, resolved by the caller.
    pub dataset: String,
    pub strategy: Strategy,
    pub init_labeled: usize,
    pub batch_per_iter: usize,
    pub iterations: usize,
    pub st: SelfTrainingConfig,
    pub noise: NoiseModel,
    pub ransac_threshold_px: f64,
    pub mc_error: McError,
    /// Defaults to the squared image diagonal.
    pub failure_penalty_px2: Option<f64>,
    /// Root keypoint for pose coverage and CoreSet distances.
    pub cs_root: usize,
    /// Root keypoint for the diversity clustering.
    pub cluster_root: usize,
    pub clusters: usize,
    pub peaks: PeakParams,
    pub heatmap: HeatmapConfig,
    pub seeds: Vec<u64>,
    pub cost: CostModel,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            dataset: String::from("dataset.json"),
            strategy: Strategy::Rand,
            init_labeled: 20,
            batch_per_iter: 10,
            iterations: 8,
            st: SelfTrainingConfig::default(),
            noise: NoiseModel::default(),
            ransac_threshold_px: 5.0,
            mc_error: McError::Squared,
            failure_penalty_px2: None,
            cs_root: 0,
            cluster_root: 2,
            clusters: 10,
            peaks: PeakParams::default(),
            heatmap: HeatmapConfig::default(),
            seeds: vec![0, 1, 2],
            cost: CostModel::default(),
        }
    }
}

impl CampaignConfig {
    /// Pseudo-labels requested per iteration.
    pub fn pseudo_per_iter(&self) -> usize {
        if self.st.enabled {
            (self.st.fraction * self.batch_per_iter as f64).round() as usize
        } else {
            0
        }
    }

    /// Fills in dataset-dependent defaults.
    pub fn resolve(&mut self, dataset: &Dataset) {
        if self.failure_penalty_px2.is_none() {
            self.failure_penalty_px2 = Some(dataset.image_diagonal_sq());
        }
    }

    /// Checks the config on its own and against `dataset`.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.init_labeled == 0 {
            return bad("init_labeled must be at least 1".into());
        }
        let needed = self.init_labeled + self.iterations * self.batch_per_iter;
        if needed > dataset.train.len() {
            return bad(format!(
                "init_labeled + iterations × batch_per_iter = {needed} exceeds the {} training frames",
                dataset.train.len()
            ));
        }
        if self.cs_root >= dataset.keypoints || self.cluster_root >= dataset.keypoints {
            return bad(format!("root keypoints must be below K = {}", dataset.keypoints));
        }
        if self.clusters == 0 || self.clusters > dataset.train.len() {
            return bad("clusters must lie in 1..=|train|".into());
        }
        if !(self.ransac_threshold_px > 0.0) {
            return bad("ransac_threshold_px must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.st.fraction) {
            return bad("st.fraction must lie in [0, 1]".into());
        }
        if let Some(p) = self.failure_penalty_px2 {
            if !(p >= 0.0) || !p.is_finite() {
                return bad("failure_penalty_px2 must be finite and non-negative".into());
            }
        }
        let wrap = |e: Error| Error::InvalidConfig(format!("{e}"));
        self.noise.validate().map_err(wrap)?;
        self.peaks.validate().map_err(wrap)?;
        ImageGrid::new(self.heatmap, dataset.image_width, dataset.image_height).map_err(wrap)?;
        Ok(())
    }
}

/// One report line per AL iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub labeled_count: usize,
    pub labeled_fraction: f64,
    /// MKPE on the held-out split after this iteration's update, mm.
    pub mkpe_mm: f64,
    /// Mean ε over the unlabeled pool that this iteration selected from.
    pub mean_epsilon: Option<f64>,
    pub pseudo_count: usize,
    pub pseudo_drift_mean_mm: Option<f64>,
    /// Normalized cluster entropy of the frames annotated this iteration
    /// (the initial pool for iteration 0).
    pub entropy: f64,
    pub hours_elapsed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRecord {
    pub frame: FrameId,
    pub epsilon: f64,
    pub inlier_count: usize,
    pub drift_mm: f64,
}

/// Per-iteration instrumentation beyond the report row.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Frames annotated this iteration, in pick order.
    pub selected: Vec<FrameId>,
    pub pseudo: Vec<PseudoRecord>,
    /// Mean MKPE of the triangulated predictions over the unlabeled pool.
    pub unlabeled_mkpe_mm: Option<f64>,
    pub cluster_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub seed: u64,
    pub strategy: Strategy,
    pub views: usize,
    pub rows: Vec<IterationRow>,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Iterations after which a pool-state invariant failed.
    pub invariant_violations: Vec<usize>,
}

struct PoolOutcome {
    id: FrameId,
    triangulation: FrameTriangulation,
    score: f64,
    error_mm: f64,
}

struct Context<'a> {
    dataset: &'a Dataset,
    config: &'a CampaignConfig,
    model: NoiseModel,
    tri: TriangulationConfig,
    grid: ImageGrid,
    clusters: ClusterModel,
    train_total: usize,
}

impl Context<'_> {
    fn gt(&self, id: FrameId) -> &Pose3D {
        &self.dataset.frame(id).expect("frame ids come from the dataset").pose
    }

    fn gt_aligned(&self, id: FrameId, root: usize) -> AlignedPose {
        align_root(self.gt(id), root).expect("roots validated against K")
    }

    fn summary(&self, pool: &PoolState, pseudo: &[PseudoLabel]) -> Result<PoolSummary> {
        let mut poses: Vec<AlignedPose> = pool.labeled.iter().map(|&id| self.gt_aligned(id, self.config.cs_root)).collect();
        for p in pseudo {
            poses.push(align_root(&p.pose, self.config.cs_root)?);
        }
        summarize_pool(poses, self.train_total)
    }

    fn histogram(&self, frames: &[FrameId]) -> Vec<usize> {
        let poses: Vec<AlignedPose> = frames.iter().map(|&id| self.gt_aligned(id, self.config.cluster_root)).collect();
        self.clusters.histogram(&poses)
    }

    fn infer_pool<E: Executor>(&self, exec: &E, frames: &[FrameId], summary: &PoolSummary, iteration: usize) -> Result<Vec<PoolOutcome>> {
        let strategy = self.config.strategy;
        let grid = strategy.needs_heatmaps().then_some(&self.grid);
        let results = exec.map(frames.len(), |i| -> Result<PoolOutcome> {
            let frame = self.dataset.frame(frames[i]).expect("frame ids come from the dataset");
            let pred = infer(frame, &self.dataset.cameras, summary, &self.model, iteration as u64, grid)?;
            let triangulation = frame_triangulate(&self.dataset.cameras, &pred.points, &self.tri)?;
            let score = match (strategy, pred.heatmaps.as_deref()) {
                (Strategy::Bsb, Some(maps)) => score_bsb(frame.id, maps, &self.config.peaks)?.value,
                (Strategy::Mpe, Some(maps)) => score_mpe(frame.id, maps, &self.config.peaks)?.value,
                (Strategy::Mvc, _) => triangulation.epsilon,
                _ => 0.0,
            };
            let error_mm = mkpe(&[triangulation.pose()], core::slice::from_ref(&frame.pose))?;
            Ok(PoolOutcome { id: frame.id, triangulation, score, error_mm })
        });
        results.into_iter().collect()
    }

    fn evaluate<E: Executor>(&self, exec: &E, summary: &PoolSummary, iteration: usize) -> Result<f64> {
        let heldout = &self.dataset.heldout;
        if heldout.is_empty() {
            return Err(Error::InvalidDataset("held-out split is empty".into()));
        }
        let results = exec.map(heldout.len(), |i| -> Result<Pose3D> {
            let frame = self.dataset.frame(heldout[i]).expect("frame ids come from the dataset");
            let pred = infer(frame, &self.dataset.cameras, summary, &self.model, iteration as u64, None)?;
            Ok(frame_triangulate(&self.dataset.cameras, &pred.points, &self.tri)?.pose())
        });
        let predicted: Vec<Pose3D> = results.into_iter().collect::<Result<_>>()?;
        let truth: Vec<Pose3D> = heldout.iter().map(|&id| self.gt(id).clone()).collect();
        mkpe(&predicted, &truth)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// The initial labeled pool for `seed`; independent of the strategy.
pub fn initial_pool(train: &[FrameId], count: usize, seed: u64) -> Vec<FrameId> {
    let mut keyed: Vec<(u64, FrameId)> =
        train.iter().map(|&id| (hash_key(&[domain::INITIAL_POOL, seed, id.0]), id)).collect();
    keyed.sort_unstable();
    let mut picked: Vec<FrameId> = keyed.into_iter().take(count).map(|(_, id)| id).collect();
    picked.sort_unstable();
    picked
}

/// Runs one campaign for one seed.
pub fn run_campaign<E: Executor>(dataset: &Dataset, config: &CampaignConfig, seed: u64, exec: &E) -> Result<CampaignReport> {
    config.validate(dataset)?;
    let views = dataset.views();
    let tri = TriangulationConfig {
        threshold_px: config.ransac_threshold_px,
        mc_error: config.mc_error,
        failure_penalty_px2: config.failure_penalty_px2.unwrap_or_else(|| dataset.image_diagonal_sq()),
    };
    let train_poses: Vec<AlignedPose> =
        dataset.train.iter().map(|&id| align_root(&dataset.frame(id).expect("validated").pose, config.cluster_root)).collect::<Result<_>>()?;
    let ctx = Context {
        dataset,
        config,
        model: NoiseModel { seed: hash_key(&[config.noise.seed, seed]), ..config.noise },
        tri,
        grid: ImageGrid::new(config.heatmap, dataset.image_width, dataset.image_height)?,
        clusters: kmeans_poses(&train_poses, config.clusters, seed)?,
        train_total: dataset.train.len(),
    };

    let initial = initial_pool(&dataset.train, config.init_labeled, seed);
    let mut pool = PoolState::new(dataset.train.iter().copied(), initial.iter().copied())?;
    let mut pseudo: Vec<PseudoLabel> = Vec::new();
    let mut summary = ctx.summary(&pool, &pseudo)?;
    let m = config.pseudo_per_iter();

    let counts = ctx.histogram(&initial);
    let mut rows = vec![IterationRow {
        iteration: 0,
        labeled_count: pool.labeled.len(),
        labeled_fraction: pool.labeled.len() as f64 / ctx.train_total as f64,
        mkpe_mm: ctx.evaluate(exec, &summary, 0)?,
        mean_epsilon: None,
        pseudo_count: 0,
        pseudo_drift_mean_mm: None,
        entropy: cluster_entropy(&counts)?,
        hours_elapsed: cost_report(0, pool.labeled.len(), &config.cost).active_learning_hours,
    }];
    let mut diagnostics = vec![IterationDiagnostics {
        iteration: 0,
        selected: initial.clone(),
        pseudo: Vec::new(),
        unlabeled_mkpe_mm: None,
        cluster_counts: counts,
    }];
    let mut invariant_violations = Vec::new();

    for iteration in 1..=config.iterations {
        let unlabeled: Vec<FrameId> = pool.unlabeled.iter().copied().collect();
        let outcomes = ctx.infer_pool(exec, &unlabeled, &summary, iteration)?;
        let mean_epsilon = mean(outcomes.iter().map(|o| o.triangulation.epsilon));
        let unlabeled_mkpe_mm = mean(outcomes.iter().map(|o| o.error_mm));

        let mut pseudo_records = Vec::new();
        if config.st.enabled {
            let tris: BTreeMap<FrameId, FrameTriangulation> =
                outcomes.iter().map(|o| (o.id, o.triangulation.clone())).collect();
            let previous = pool.pseudo.clone();
            let chosen: BTreeSet<FrameId> = select_pseudo_labels(&pool, &previous, m, &tris, views, config.st.variant);
            pseudo = outcomes
                .iter()
                .filter(|o| chosen.contains(&o.id))
                .map(|o| PseudoLabel { frame: o.id, pose: o.triangulation.pose(), epsilon: o.triangulation.epsilon, iteration })
                .collect();
            for (label, o) in pseudo.iter().zip(outcomes.iter().filter(|o| chosen.contains(&o.id))) {
                pseudo_records.push(PseudoRecord {
                    frame: label.frame,
                    epsilon: label.epsilon,
                    inlier_count: o.triangulation.inlier_count,
                    drift_mm: o.error_mm,
                });
            }
            pool.set_pseudo(chosen)?;
        }

        let mut inputs = SelectionInputs { rand_key: hash_key(&[seed, iteration as u64]), ..Default::default() };
        match config.strategy {
            Strategy::Bsb | Strategy::Mpe | Strategy::Mvc => {
                inputs.scores = outcomes.iter().map(|o| (o.id, o.score)).collect();
            }
            Strategy::Coreset => {
                for o in &outcomes {
                    inputs.candidate_poses.insert(o.id, align_root(&o.triangulation.pose(), config.cs_root)?);
                }
                inputs.labeled_poses = pool.labeled.iter().map(|&id| ctx.gt_aligned(id, config.cs_root)).collect();
            }
            Strategy::Rand => {}
        }
        let batch = select_batch(config.strategy, &pool, config.batch_per_iter, &inputs)?;
        pool.annotate(&batch)?;
        pool.iteration = iteration;
        if !pool.check_invariants() {
            invariant_violations.push(iteration);
        }

        summary = ctx.summary(&pool, &pseudo)?;
        let counts = ctx.histogram(&batch);
        rows.push(IterationRow {
            iteration,
            labeled_count: pool.labeled.len(),
            labeled_fraction: pool.labeled.len() as f64 / ctx.train_total as f64,
            mkpe_mm: ctx.evaluate(exec, &summary, iteration)?,
            mean_epsilon,
            pseudo_count: pseudo.len(),
            pseudo_drift_mean_mm: mean(pseudo_records.iter().map(|r| r.drift_mm)),
            entropy: if batch.is_empty() { 0.0 } else { cluster_entropy(&counts)? },
            hours_elapsed: cost_report(iteration, pool.labeled.len(), &config.cost).active_learning_hours,
        });
        diagnostics.push(IterationDiagnostics {
            iteration,
            selected: batch,
            pseudo: pseudo_records,
            unlabeled_mkpe_mm,
            cluster_counts: counts,
        });
    }

    Ok(CampaignReport { seed, strategy: config.strategy, views, rows, diagnostics, invariant_violations })
}
