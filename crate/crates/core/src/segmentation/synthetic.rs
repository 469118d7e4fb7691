use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

use super::FrameSequence;

/// A generated sequence of solid-color segments joined by hard cuts.
#[derive(Clone, Debug)]
pub struct CutSequence {
    pub frames: FrameSequence,
    /// First frame of every segment after the first.
    pub cuts: Vec<usize>,
}

/// Fully saturated RGB color at the center of hue bin `hue_bin` of `hue_bins`,
/// at saturation and value `level`.
fn hue_color(hue_bin: usize, hue_bins: usize, level: f64) -> [f64; 3] {
    let h = (hue_bin as f64 + 0.5) * 360.0 / hue_bins as f64;
    let (s, v) = (level, level);
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0).rem_euclid(2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

/// Builds segments of the given lengths, each a solid color from a different
/// hue bin than its predecessor, with i.i.d. Gaussian pixel noise.
pub fn synthesize_cut_sequence<R: Rng + ?Sized>(
    rng: &mut R,
    width: usize,
    height: usize,
    segment_lengths: &[usize],
    noise_sigma: f64,
) -> Result<CutSequence> {
    const HUE_BINS: usize = 8;
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let mut data = Vec::with_capacity(width * height * 3 * segment_lengths.iter().sum::<usize>());
    let mut cuts = Vec::new();
    let mut prev_bin = None;
    let mut frame = 0;
    for (i, &len) in segment_lengths.iter().enumerate() {
        if i > 0 {
            cuts.push(frame);
        }
        let hue_bin = loop {
            let b = rng.random_range(0..HUE_BINS);
            if Some(b) != prev_bin {
                break b;
            }
        };
        prev_bin = Some(hue_bin);
        // saturation/value at the centers of the two brightest of four bins
        let level = if rng.random_bool(0.5) { 0.625 } else { 0.875 };
        let color = hue_color(hue_bin, HUE_BINS, level);
        for _ in 0..len {
            for _ in 0..width * height {
                for &c in &color {
                    let v = if noise_sigma > 0.0 { c + noise.sample(rng) } else { c };
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        frame += len;
    }
    Ok(CutSequence {
        frames: FrameSequence::new(width, height, data)?,
        cuts,
    })
}

/// Solid single-color frames.
pub fn solid_sequence(width: usize, height: usize, rgb: [u8; 3], frames: usize) -> Result<FrameSequence> {
    let data = rgb.iter().copied().cycle().take(width * height * 3 * frames).collect();
    FrameSequence::new(width, height, data)
}
