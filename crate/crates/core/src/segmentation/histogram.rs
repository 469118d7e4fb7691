use crate::error::{Error, Result};

use super::{Frame, SegmenterParams};

/// Chi-square denominator guard.
pub const CHI_SQUARE_EPS: f64 = 1e-10;

/// Hexcone RGB→HSV. `h ∈ [0,360)`, `s, v ∈ [0,1]`.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h.rem_euclid(360.0), s, max)
}

fn bin(value: f64, range: f64, bins: usize) -> usize {
    ((value / range * bins as f64) as usize).min(bins - 1)
}

/// Joint-bin index of an RGB pixel: `(h·S + s)·V + v`.
pub fn hsv_bin(rgb: [u8; 3], params: &SegmenterParams) -> usize {
    let (h, s, v) = rgb_to_hsv(rgb);
    let hb = bin(h, 360.0, params.hue_bins);
    let sb = bin(s, 1.0, params.saturation_bins);
    let vb = bin(v, 1.0, params.value_bins);
    (hb * params.saturation_bins + sb) * params.value_bins + vb
}

/// L1-normalized joint HSV histogram of a frame.
pub fn frame_histogram(frame: &Frame<'_>, params: &SegmenterParams) -> Vec<f64> {
    let mut hist = vec![0.0; params.histogram_len()];
    for px in frame.pixels.chunks_exact(3) {
        hist[hsv_bin([px[0], px[1], px[2]], params)] += 1.0;
    }
    let total = frame.pixel_count() as f64;
    hist.iter_mut().for_each(|c| *c /= total);
    hist
}

/// `Σ (a−b)² / (a+b+ε)`.
pub fn boundary_score(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("boundary_score", &[a.len()], &[b.len()]));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y) / (x + y + CHI_SQUARE_EPS))
        .sum())
}
