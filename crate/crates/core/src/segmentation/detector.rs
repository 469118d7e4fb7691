use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{boundary_score, frame_histogram, FrameSequence};

/// Identifies a shot by its video and position within it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShotId {
    pub video: String,
    pub ordinal: u32,
}

impl ShotId {
    pub fn new(video: impl Into<String>, ordinal: u32) -> Self {
        Self {
            video: video.into(),
            ordinal,
        }
    }
}

/// Written as `video/ordinal`.
impl fmt::Display for ShotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.video, self.ordinal)
    }
}

impl FromStr for ShotId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (video, ordinal) = s
            .rsplit_once('/')
            .ok_or_else(|| Error::Format(format!("shot id `{s}` is not video/ordinal")))?;
        let ordinal = ordinal
            .parse()
            .map_err(|_| Error::Format(format!("shot id `{s}` has a bad ordinal")))?;
        if video.is_empty() {
            return Err(Error::Format(format!("shot id `{s}` has an empty video id")));
        }
        Ok(Self::new(video, ordinal))
    }
}

/// Frames `[start, end)` of a video.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub id: ShotId,
    pub start: usize,
    pub end: usize,
}

impl Shot {
    pub fn new(id: ShotId, start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::Range(format!("shot [{start},{end}) is empty")));
        }
        Ok(Self { id, start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterParams {
    pub hue_bins: usize,
    pub saturation_bins: usize,
    pub value_bins: usize,
    /// Trailing window `W` of boundary scores used for the adaptive threshold.
    pub window: usize,
    /// Threshold multiplier `k` on the window's standard deviation.
    pub k: f64,
    pub min_shot_len: usize,
    /// Absolute floor a boundary score must also exceed.
    pub floor: f64,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        Self {
            hue_bins: 8,
            saturation_bins: 4,
            value_bins: 4,
            window: 24,
            k: 4.0,
            min_shot_len: 8,
            floor: 0.2,
        }
    }
}

impl SegmenterParams {
    pub fn histogram_len(&self) -> usize {
        self.hue_bins * self.saturation_bins * self.value_bins
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.hue_bins,
            self.saturation_bins,
            self.value_bins,
            self.window,
            self.min_shot_len,
        ];
        if counts.contains(&0) || !(self.k > 0.0) || !(self.floor > 0.0) {
            return Err(Error::Config(format!("segmenter parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Boundary score between each frame and its predecessor; entry `t-1` scores
/// the transition into frame `t`.
pub fn boundary_scores(seq: &FrameSequence, params: &SegmenterParams) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let hists: Vec<Vec<f64>> = (0..seq.frame_count())
        .into_par_iter()
        .map(|t| frame_histogram(&seq.frame(t).expect("in range"), params))
        .collect();
    hists.windows(2).map(|w| boundary_score(&w[0], &w[1])).collect()
}

/// Cut positions `t` (first frame of a new shot), before short-shot merging.
///
/// A cut is declared when the score exceeds both the absolute floor and
/// `mean + k·std` of the preceding `W` non-cut scores.
pub fn detect_cuts(scores: &[f64], params: &SegmenterParams) -> Vec<usize> {
    let mut cuts = Vec::new();
    let mut is_cut = vec![false; scores.len()];
    for (i, &score) in scores.iter().enumerate() {
        let lo = i.saturating_sub(params.window);
        let window: Vec<f64> = (lo..i).filter(|&j| !is_cut[j]).map(|j| scores[j]).collect();
        let threshold = if window.is_empty() {
            0.0
        } else {
            let n = window.len() as f64;
            let mean = window.iter().sum::<f64>() / n;
            let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            mean + params.k * var.sqrt()
        };
        if score > threshold && score > params.floor {
            is_cut[i] = true;
            cuts.push(i + 1);
        }
    }
    cuts
}

/// Turns cut positions into shot bounds covering `[0, frame_count)`, merging
/// shots shorter than `min_len` into their predecessor (the first shot, having
/// none, merges into its successor).
pub fn merge_short_shots(cuts: &[usize], frame_count: usize, min_len: usize) -> Vec<(usize, usize)> {
    let mut bounds: Vec<usize> = std::iter::once(0)
        .chain(cuts.iter().copied().filter(|&c| c > 0 && c < frame_count))
        .chain(std::iter::once(frame_count))
        .collect();
    bounds.dedup();
    let mut i = 0;
    while i + 1 < bounds.len() {
        if bounds.len() <= 2 || bounds[i + 1] - bounds[i] >= min_len {
            i += 1;
            continue;
        }
        if i == 0 {
            bounds.remove(1);
        } else {
            bounds.remove(i);
            i -= 1;
        }
    }
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Partitions a frame sequence into shots that tile it exactly.
pub fn detect_shots(video_id: &str, seq: &FrameSequence, params: &SegmenterParams) -> Result<Vec<Shot>> {
    params.validate()?;
    if seq.frame_count() == 0 {
        return Err(Error::EmptyInput(format!("video `{video_id}` has no frames")));
    }
    let scores = boundary_scores(seq, params)?;
    let cuts = detect_cuts(&scores, params);
    merge_short_shots(&cuts, seq.frame_count(), params.min_shot_len)
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Shot::new(ShotId::new(video_id, i as u32), s, e))
        .collect()
}

/// `video_id<TAB>ordinal<TAB>start<TAB>end` per line.
pub fn format_shot_list(shots: &[Shot]) -> String {
    shots
        .iter()
        .map(|s| format!("{}\t{}\t{}\t{}\n", s.id.video, s.id.ordinal, s.start, s.end))
        .collect()
}

pub fn parse_shot_list(text: &str) -> Result<Vec<Shot>> {
    let mut shots = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: &str| Error::Parse {
            line: n + 1,
            reason: reason.into(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err("expected 4 tab-separated fields"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| parse_err("bad integer"));
        let ordinal = u32::try_from(num(fields[1])?).map_err(|_| parse_err("ordinal too large"))?;
        let shot = Shot::new(ShotId::new(fields[0], ordinal), num(fields[2])?, num(fields[3])?)
            .map_err(|e| parse_err(&e.to_string()))?;
        shots.push(shot);
    }
    Ok(shots)
}
