use std::f64::consts::PI;

use crate::segmentation::{frame_histogram, Frame, SegmenterParams};

/// Maps one RGB frame to a fixed-length feature vector.
pub trait FrameFeatureExtractor: Send + Sync {
    fn dim(&self) -> usize;

    /// Output is finite and has length [`FrameFeatureExtractor::dim`].
    fn extract(&self, frame: &Frame<'_>) -> Vec<f32>;
}

/// HSV color histogram, an intensity-gradient orientation histogram and the
/// mean/std of intensity. Both histogram blocks sum to one.
#[derive(Clone, Debug)]
pub struct HistogramEdgeExtractor {
    pub color: SegmenterParams,
    pub orientation_bins: usize,
}

impl Default for HistogramEdgeExtractor {
    fn default() -> Self {
        Self {
            color: SegmenterParams::default(),
            orientation_bins: 8,
        }
    }
}

impl HistogramEdgeExtractor {
    fn intensity(frame: &Frame<'_>) -> Vec<f64> {
        frame
            .pixels
            .chunks_exact(3)
            .map(|p| (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0))
            .collect()
    }

    /// Magnitude-weighted histogram of unsigned gradient orientation over
    /// interior pixels; uniform when the frame has no gradient at all.
    pub fn orientation_histogram(&self, frame: &Frame<'_>) -> Vec<f64> {
        let bins = self.orientation_bins;
        let (w, h) = (frame.width, frame.height);
        let lum = Self::intensity(frame);
        let mut hist = vec![0.0; bins];
        for y in 1..h.saturating_sub(1) {
            for x in 1..w.saturating_sub(1) {
                let gx = lum[y * w + x + 1] - lum[y * w + x - 1];
                let gy = lum[(y + 1) * w + x] - lum[(y - 1) * w + x];
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    continue;
                }
                let theta = gy.atan2(gx).rem_euclid(PI);
                hist[((theta / PI * bins as f64) as usize).min(bins - 1)] += mag;
            }
        }
        let total: f64 = hist.iter().sum();
        if total > 0.0 {
            hist.iter_mut().for_each(|v| *v /= total);
        } else {
            hist.fill(1.0 / bins as f64);
        }
        hist
    }
}

impl FrameFeatureExtractor for HistogramEdgeExtractor {
    fn dim(&self) -> usize {
        self.color.histogram_len() + self.orientation_bins + 2
    }

    fn extract(&self, frame: &Frame<'_>) -> Vec<f32> {
        let lum = Self::intensity(frame);
        let n = lum.len() as f64;
        let mean = lum.iter().sum::<f64>() / n;
        let std = (lum.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        frame_histogram(frame, &self.color)
            .into_iter()
            .chain(self.orientation_histogram(frame))
            .chain([mean, std])
            .map(|v| v as f32)
            .collect()
    }
}
