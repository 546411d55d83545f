//! Keypoint heatmaps, Gaussian rendering, local peak extraction, and the
//! per-view best-vs-second-best margin and multiple-peak entropy metrics.

use alloc::vec;
use alloc::vec::Vec;

// f64 math comes from std when it is linked; num-traits supplies it otherwise
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Row-major grid of non-negative confidences. Cell `(u, v)` is column `u`,
/// row `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("heatmap must have positive size"));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("heatmap values must be finite and non-negative"));
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { width: self.width, height: self.height, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Adds `amplitude · exp(−‖x − center‖² / 2σ²)` to every cell.
    pub fn add_gaussian(&mut self, center: Point2, sigma_px: f64, amplitude: f64) {
        let denom = 2.0 * sigma_px * sigma_px;
        let gu: Vec<f64> = (0..self.width).map(|u| (-(u as f64 - center.x).powi(2) / denom).exp()).collect();
        let gv: Vec<f64> = (0..self.height).map(|v| (-(v as f64 - center.y).powi(2) / denom).exp()).collect();
        for (row, wv) in self.values.chunks_exact_mut(self.width).zip(&gv) {
            for (cell, wu) in row.iter_mut().zip(&gu) {
                *cell += amplitude * wu * wv;
            }
        }
    }
}

/// Renders an isotropic unit-amplitude Gaussian centered at `center` (cell
/// coordinates; off-grid centers are allowed).
pub fn render_gaussian(center: Point2, sigma_px: f64, width: usize, height: usize) -> Result<Heatmap> {
    if !(sigma_px > 0.0) {
        return Err(Error::InvalidParameter("sigma_px must be positive"));
    }
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("heatmap must have positive size"));
    }
    let mut h = Heatmap::zeros(width, height);
    h.add_gaussian(center, sigma_px, 1.0);
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakParams {
    /// Side of the square local-maximum window; odd, at least 3.
    pub window: usize,
    /// Peaks below `min_frac × global max` are dropped.
    pub min_frac: f64,
    pub max_peaks: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self { window: 3, min_frac: 0.1, max_peaks: 5 }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParameter("peak window must be odd and at least 3"));
        }
        if !(0.0..1.0).contains(&self.min_frac) {
            return Err(Error::InvalidParameter("min_frac must lie in [0, 1)"));
        }
        if self.max_peaks == 0 {
            return Err(Error::InvalidParameter("max_peaks must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub u: usize,
    pub v: usize,
    pub value: f64,
}

/// Local maxima in descending order of value (ties in row-major order). The
/// global argmax is always the first entry.
pub fn local_peaks(h: &Heatmap, params: &PeakParams) -> Result<Vec<Peak>> {
    params.validate()?;
    let (argmax, max) = h
        .values
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    if !(max > 0.0) {
        return Err(Error::EmptyHeatmap);
    }
    let radius = params.window / 2;
    let threshold = params.min_frac * max;
    let (w, hgt) = (h.width, h.height);

    let mut peaks = Vec::new();
    for v in 0..hgt {
        for u in 0..w {
            let value = h.values[v * w + u];
            if value < threshold || value <= 0.0 {
                continue;
            }
            let mut strict = true;
            'window: for nv in v.saturating_sub(radius)..(v + radius + 1).min(hgt) {
                for nu in u.saturating_sub(radius)..(u + radius + 1).min(w) {
                    if (nu, nv) != (u, v) && h.values[nv * w + nu] >= value {
                        strict = false;
                        break 'window;
                    }
                }
            }
            if strict {
                peaks.push(Peak { u, v, value });
            }
        }
    }
    let global = Peak { u: argmax % w, v: argmax / w, value: max };
    if !peaks.iter().any(|p| (p.u, p.v) == (global.u, global.v)) {
        peaks.push(global);
    }
    // stable sort keeps row-major order among equal values, except the
    // designated argmax which must lead
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    if let Some(pos) = peaks.iter().position(|p| (p.u, p.v) == (global.u, global.v)) {
        let g = peaks.remove(pos);
        peaks.insert(0, g);
    }
    peaks.truncate(params.max_peaks);
    Ok(peaks)
}

fn keypoint_margin(h: &Heatmap, params: &PeakParams) -> Result<f64> {
    let peaks = local_peaks(h, params)?;
    let best = peaks[0].value;
    let second = peaks.get(1).map_or(0.0, |p| p.value / best);
    Ok(1.0 - second)
}

fn keypoint_entropy(h: &Heatmap, params: &PeakParams) -> Result<f64> {
    let peaks = local_peaks(h, params)?;
    if peaks.len() < 2 {
        return Ok(0.0);
    }
    // log-sum-exp on raw peak values
    let top = peaks[0].value;
    let weights: Vec<f64> = peaks.iter().map(|p| (p.value - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights
        .iter()
        .map(|w| w / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

fn mean_over<F>(heatmaps: &[Heatmap], params: &PeakParams, f: F) -> Result<f64>
where
    F: Fn(&Heatmap, &PeakParams) -> Result<f64>,
{
    if heatmaps.is_empty() {
        return Err(Error::InvalidParameter("view has no keypoint heatmaps"));
    }
    let mut sum = 0.0;
    for h in heatmaps {
        sum += f(h, params)?;
    }
    Ok(sum / heatmaps.len() as f64)
}

/// Mean over keypoints of the best-vs-second-best margin on max-normalized
/// heatmaps. A single-peak keypoint has margin 1. Small margin = uncertain.
pub fn bsb_view(heatmaps: &[Heatmap], params: &PeakParams) -> Result<f64> {
    mean_over(heatmaps, params, keypoint_margin)
}

/// Mean over keypoints of the entropy (nats) of a softmax over raw heatmap
/// values at the local peaks.
pub fn mpe_view(heatmaps: &[Heatmap], params: &PeakParams) -> Result<f64> {
    mean_over(heatmaps, params, keypoint_entropy)
}

/// Heatmap resolution and ground-truth Gaussian width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub width: usize,
    pub height: usize,
    pub sigma_px: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self { width: 64, height: 64, sigma_px: 2.0 }
    }
}

/// Maps image pixels onto a heatmap grid covering the whole image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub config: HeatmapConfig,
    scale_u: f64,
    scale_v: f64,
}

impl ImageGrid {
    pub fn new(config: HeatmapConfig, image_width: f64, image_height: f64) -> Result<Self> {
        if config.width == 0 || config.height == 0 || !(config.sigma_px > 0.0) {
            return Err(Error::InvalidParameter("heatmap config needs positive size and sigma"));
        }
        if !(image_width > 0.0 && image_height > 0.0) {
            return Err(Error::InvalidParameter("image size must be positive"));
        }
        Ok(Self { config, scale_u: config.width as f64 / image_width, scale_v: config.height as f64 / image_height })
    }

    /// Image pixel to heatmap cell coordinates.
    pub fn to_cell(&self, p: &Point2) -> Point2 {
        Point2::new(p.x * self.scale_u, p.y * self.scale_v)
    }

    /// Ground-truth style heatmap for an image location.
    pub fn render(&self, p: &Point2) -> Heatmap {
        let mut h = Heatmap::zeros(self.config.width, self.config.height);
        h.add_gaussian(self.to_cell(p), self.config.sigma_px, 1.0);
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Heatmap with isolated spikes of the given values.
    fn spikes(values: &[f64]) -> Heatmap {
        let mut h = Heatmap::zeros(32, 8);
        for (i, &v) in values.iter().enumerate() {
            h.values[4 * 32 + 2 + 6 * i] = v;
        }
        h
    }

    #[test]
    fn gaussian_peak_and_neighbor() {
        let h = render_gaussian(Point2::new(32.0, 32.0), 2.0, 64, 64).unwrap();
        assert_eq!(h.get(32, 32), 1.0);
        assert_relative_eq!(h.get(33, 32), (-1.0f64 / 8.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(h.get(33, 32), 0.8825, epsilon = 1e-4);
    }

    #[test]
    fn gaussian_far_off_grid_is_tiny() {
        let h = render_gaussian(Point2::new(-500.0, 900.0), 2.0, 64, 64).unwrap();
        assert!(h.max() < 1e-6);
        assert!(h.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(render_gaussian(Point2::origin(), 0.0, 4, 4).is_err());
    }

    #[test]
    fn single_gaussian_single_peak() {
        let h = render_gaussian(Point2::new(20.0, 40.0), 2.0, 64, 64).unwrap();
        let peaks = local_peaks(&h, &PeakParams::default()).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].u, peaks[0].v), (20, 40));
    }

    #[test]
    fn two_gaussians_two_peaks() {
        let mut h = render_gaussian(Point2::new(20.0, 30.0), 2.0, 64, 64).unwrap();
        h.add_gaussian(Point2::new(40.0, 30.0), 2.0, 1.0);
        let peaks = local_peaks(&h, &PeakParams::default()).unwrap();
        assert_eq!(peaks.len(), 2);
        let mut cells: Vec<(usize, usize)> = peaks.iter().map(|p| (p.u, p.v)).collect();
        cells.sort();
        assert_eq!(cells, [(20, 30), (40, 30)]);
    }

    #[test]
    fn empty_heatmap_errors() {
        assert_eq!(local_peaks(&Heatmap::zeros(8, 8), &PeakParams::default()), Err(Error::EmptyHeatmap));
        assert_eq!(bsb_view(&[Heatmap::zeros(8, 8)], &PeakParams::default()), Err(Error::EmptyHeatmap));
    }

    #[test]
    fn plateau_still_reports_argmax() {
        let mut h = Heatmap::zeros(8, 8);
        h.values[3 * 8 + 3] = 1.0;
        h.values[3 * 8 + 4] = 1.0;
        let peaks = local_peaks(&h, &PeakParams::default()).unwrap();
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].u, peaks[0].v), (3, 3));
    }

    #[test]
    fn peaks_respect_min_frac_and_max_peaks() {
        let h = spikes(&[1.0, 0.5, 0.05, 0.4]);
        let params = PeakParams::default();
        let values: Vec<f64> = local_peaks(&h, &params).unwrap().iter().map(|p| p.value).collect();
        assert_eq!(values, [1.0, 0.5, 0.4]);
        let params = PeakParams { max_peaks: 2, ..params };
        assert_eq!(local_peaks(&h, &params).unwrap().len(), 2);
    }

    #[test]
    fn invalid_peak_params() {
        let h = spikes(&[1.0]);
        for p in [
            PeakParams { window: 4, ..Default::default() },
            PeakParams { window: 1, ..Default::default() },
            PeakParams { min_frac: 1.0, ..Default::default() },
            PeakParams { max_peaks: 0, ..Default::default() },
        ] {
            assert!(local_peaks(&h, &p).is_err());
        }
    }

    #[test]
    fn bsb_examples() {
        let p = PeakParams::default();
        assert_relative_eq!(bsb_view(&[spikes(&[1.0, 0.5])], &p).unwrap(), 0.5);
        assert_relative_eq!(bsb_view(&[spikes(&[2.0, 1.2]), spikes(&[5.0, 4.0])], &p).unwrap(), 0.3, epsilon = 1e-12);
        assert_eq!(bsb_view(&[spikes(&[0.7])], &p).unwrap(), 1.0);
    }

    #[test]
    fn mpe_examples() {
        let p = PeakParams::default();
        assert_eq!(mpe_view(&[spikes(&[1.0])], &p).unwrap(), 0.0);
        assert_relative_eq!(mpe_view(&[spikes(&[1.0, 1.0])], &p).unwrap(), core::f64::consts::LN_2, epsilon = 1e-12);
        let e = mpe_view(&[spikes(&[2.0, 1.0])], &p).unwrap();
        // independent evaluation of the two-point softmax entropy
        let p1 = 1.0 / (1.0 + (-1.0f64).exp());
        let expected = -(p1 * p1.ln() + (1.0 - p1) * (1.0 - p1).ln());
        assert_relative_eq!(e, expected, epsilon = 1e-12);
        assert_relative_eq!(e, 0.5823, epsilon = 1e-4);
    }
}
