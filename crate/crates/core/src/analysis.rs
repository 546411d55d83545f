//! Pose clustering, normalized cluster entropy, and annotation cost accounting.

use alloc::vec;
use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::AlignedPose;
use crate::rng::{domain, stream};

const MAX_LLOYD_ITERATIONS: usize = 100;

/// k-means model over flattened aligned poses.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centers, mm², after each
    /// assignment step.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }

    /// Index of the nearest center.
    pub fn assign(&self, pose: &AlignedPose) -> usize {
        nearest(&self.centers, &pose.flatten()).0
    }

    /// Number of poses per cluster.
    pub fn histogram<'a>(&self, poses: impl IntoIterator<Item = &'a AlignedPose>) -> Vec<usize> {
        let mut counts = vec![0; self.k()];
        for p in poses {
            counts[self.assign(p)] += 1;
        }
        counts
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(c, x)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Lloyd's k-means with k-means++ seeding on flattened aligned poses.
///
/// Iterates until assignments stop changing or 100 iterations. A cluster
/// that empties is re-seeded at the point farthest from its current center.
pub fn kmeans_poses(poses: &[AlignedPose], k: usize, seed: u64) -> Result<ClusterModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive"));
    }
    if poses.len() < k {
        return Err(Error::TooFewPoses { got: poses.len(), k });
    }
    let dim = poses[0].len();
    if let Some(p) = poses.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    let data: Vec<Vec<f64>> = poses.iter().map(AlignedPose::flatten).collect();

    let mut rng = stream(&[domain::KMEANS, seed]);
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // every point coincides with a center already
            rng.random_range(0..data.len())
        };
        centers.push(data[next].clone());
        for (d, x) in d2.iter_mut().zip(&data) {
            *d = d.min(sq_dist(x, &centers[centers.len() - 1]));
        }
    }

    let mut assignments = vec![usize::MAX; data.len()];
    let mut inertia_history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for (a, x) in assignments.iter_mut().zip(&data) {
            let (c, d) = nearest(&centers, x);
            inertia += d;
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        inertia_history.push(inertia);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; data[0].len()]; k];
        let mut counts = vec![0usize; k];
        for (&a, x) in assignments.iter().zip(&data) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                let far = data
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, sq_dist(x, &centers[assignments[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                centers[c] = data[far].clone();
            }
        }
    }
    Ok(ClusterModel { centers, assignments, inertia_history })
}

/// Shannon entropy of the cluster histogram divided by `ln k`; in `[0, 1]`.
pub fn cluster_entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    if counts.len() < 2 {
        return Ok(0.0);
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok((h / (counts.len() as f64).ln()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub minutes_per_frame: f64,
    pub hours_per_training: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { minutes_per_frame: 1.0, hours_per_training: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// Annotation plus one training run per AL iteration, hours.
    pub active_learning_hours: f64,
    /// Annotation only, hours.
    pub conventional_hours: f64,
}

pub fn cost_report(iterations: usize, frames_labeled: usize, cost: &CostModel) -> CostReport {
    let annotation = frames_labeled as f64 * cost.minutes_per_frame / 60.0;
    CostReport {
        active_learning_hours: iterations as f64 * cost.hours_per_training + annotation,
        conventional_hours: annotation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::pose::{align_root, Pose3D};
    use approx::assert_relative_eq;

    fn pose(x: f64, y: f64) -> AlignedPose {
        align_root(&Pose3D::new(vec![Point3::origin(), Point3::new(x, y, 0.0)]).unwrap(), 0).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_relative_eq!(cluster_entropy(&[10; 10]).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(cluster_entropy(&[0, 0, 7, 0]).unwrap(), 0.0);
        assert_eq!(cluster_entropy(&[0, 0]), Err(Error::EmptyCounts));
        assert_eq!(cluster_entropy(&[]), Err(Error::EmptyCounts));
    }

    #[test]
    fn kmeans_distinct_points_zero_inertia() {
        let poses: Vec<_> = (0..5).map(|i| pose(i as f64 * 10.0, 0.0)).collect();
        let m = kmeans_poses(&poses, 5, 3).unwrap();
        assert_eq!(m.inertia(), 0.0);
        let mut a = m.assignments.clone();
        a.sort();
        a.dedup();
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut poses = Vec::new();
        for i in 0..20 {
            let jitter = (i as f64 * 0.37).sin() * 5.0;
            poses.push(pose(jitter, jitter * 0.5));
            poses.push(pose(1000.0 + jitter, -jitter));
        }
        let m = kmeans_poses(&poses, 2, 11).unwrap();
        for (i, &a) in m.assignments.iter().enumerate() {
            assert_eq!(a, m.assignments[i % 2]);
        }
        assert_ne!(m.assignments[0], m.assignments[1]);
    }

    #[test]
    fn kmeans_too_few() {
        assert_eq!(kmeans_poses(&[pose(0.0, 0.0)], 2, 0), Err(Error::TooFewPoses { got: 1, k: 2 }));
    }

    #[test]
    fn kmeans_inertia_non_increasing() {
        let poses: Vec<_> = (0..60).map(|i| pose((i * 37 % 101) as f64, (i * 53 % 89) as f64)).collect();
        let m = kmeans_poses(&poses, 4, 5).unwrap();
        for w in m.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn cost_examples() {
        let c = CostModel::default();
        assert_relative_eq!(cost_report(3, 300, &c).active_learning_hours, 8.0);
        assert_relative_eq!(cost_report(0, 120, &c).conventional_hours, 2.0);
        assert_relative_eq!(cost_report(0, 120, &c).active_learning_hours, 2.0);
        assert_relative_eq!(cost_report(4, 0, &c).active_learning_hours, 4.0);
    }
}
