#![allow(dead_code)]

use mvactive_core::geometry::{CameraParams, Point3};
use mvactive_core::nalgebra::{Matrix3, Vector3};
use mvactive_core::pose::{align_root, AlignedPose, Pose3D};

pub fn intrinsics(f: f64) -> Matrix3<f64> {
    Matrix3::new(f, 0.0, 500.0, 0.0, f, 500.0, 0.0, 0.0, 1.0)
}

/// `n` cameras evenly spaced on a horizontal ring, looking at the origin.
/// `phase` rotates the whole ring; `height` lifts it.
pub fn ring(n: usize, radius: f64, phase: f64, height: f64) -> Vec<CameraParams> {
    (0..n)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
            let eye = Point3::new(radius * a.cos(), radius * a.sin(), height);
            CameraParams::look_at(i, intrinsics(1000.0), eye, Point3::origin(), Vector3::z()).unwrap()
        })
        .collect()
}

pub fn aligned(points: &[[f64; 3]]) -> AlignedPose {
    let pose = Pose3D::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()).unwrap();
    align_root(&pose, 0).unwrap()
}
