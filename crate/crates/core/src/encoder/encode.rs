use std::collections::HashMap;

use rayon::prelude::*;

use crate::autodiff::{Bound, Scalar, Tape, Var};
use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::segmentation::{FrameSequence, Shot, ShotId};

use super::{sample_frames, sample_shots, FeatureStore, FrameFeatureExtractor, Mode};

/// Accumulates in f64, so the mean of identical rows is that row exactly.
pub(crate) fn mean_of(rows: impl ExactSizeIterator<Item = Vec<f32>>, dim: usize) -> Vec<f32> {
    let n = rows.len() as f64;
    let mut acc = vec![0.0f64; dim];
    for r in rows {
        acc.iter_mut().zip(&r).for_each(|(a, &v)| *a += v as f64);
    }
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

fn check_bounds(shot: &Shot, frames: &FrameSequence) -> Result<()> {
    if shot.start >= shot.end || shot.end > frames.frame_count() {
        return Err(Error::Range(format!(
            "shot {} spans [{},{}) outside a {}-frame sequence",
            shot.id,
            shot.start,
            shot.end,
            frames.frame_count()
        )));
    }
    Ok(())
}

/// Mean of the extractor's features over `m` sampled frames of the shot.
pub fn encode_shot(
    shot: &Shot,
    frames: &FrameSequence,
    extractor: &dyn FrameFeatureExtractor,
    m: usize,
    mode: &mut Mode<'_>,
) -> Result<Vec<f32>> {
    check_bounds(shot, frames)?;
    let picks = sample_frames(shot, m.max(1), mode);
    let feats: Vec<Vec<f32>> = picks
        .iter()
        .map(|&t| frames.frame(t).map(|f| extractor.extract(&f)))
        .collect::<Result<_>>()?;
    Ok(mean_of(feats.into_iter(), extractor.dim()))
}

/// Mean of `n` sampled shot features of a video.
pub fn encode_video(
    shots: &[Shot],
    frames: &FrameSequence,
    extractor: &dyn FrameFeatureExtractor,
    n: usize,
    m: usize,
    mode: &mut Mode<'_>,
) -> Result<Vec<f32>> {
    let picks = sample_shots(shots.len(), n.max(1), mode)?;
    let feats: Vec<Vec<f32>> = picks
        .iter()
        .map(|&i| encode_shot(&shots[i], frames, extractor, m, mode))
        .collect::<Result<_>>()?;
    Ok(mean_of(feats.into_iter(), extractor.dim()))
}

/// Eval-mode features for every shot, computed in parallel and stored in shot
/// order.
pub fn extract_store(
    shots: &[Shot],
    frames: &FrameSequence,
    extractor: &dyn FrameFeatureExtractor,
    m: usize,
) -> Result<FeatureStore> {
    let feats: Vec<Vec<f32>> = shots
        .par_iter()
        .map(|s| encode_shot(s, frames, extractor, m, &mut Mode::Eval))
        .collect::<Result<_>>()?;
    let mut store = FeatureStore::new(extractor.dim());
    for (shot, f) in shots.iter().zip(&feats) {
        store.insert(shot.id.clone(), f)?;
    }
    Ok(store)
}

/// Where a model gets per-shot features from: a precomputed cache, or frames
/// that are re-sampled on every training draw.
pub trait ShotSource: Sync {
    fn dim(&self) -> usize;

    fn shot_count(&self, video: &str) -> Result<usize>;

    /// Feature of the video's `index`-th shot.
    fn shot_feature(&self, video: &str, index: usize, mode: &mut Mode<'_>) -> Result<Vec<f32>>;

    fn shot_id(&self, video: &str, index: usize) -> Result<ShotId>;

    /// Mean over `n` sampled shots.
    fn video_feature(&self, video: &str, n: usize, mode: &mut Mode<'_>) -> Result<Vec<f32>> {
        let picks = sample_shots(self.shot_count(video)?, n.max(1), mode)?;
        let feats: Vec<Vec<f32>> = picks
            .iter()
            .map(|&i| self.shot_feature(video, i, mode))
            .collect::<Result<_>>()?;
        Ok(mean_of(feats.into_iter(), self.dim()))
    }

    /// Every shot's feature in order.
    fn all_shots(&self, video: &str) -> Result<Vec<Vec<f32>>> {
        (0..self.shot_count(video)?)
            .map(|i| self.shot_feature(video, i, &mut Mode::Eval))
            .collect()
    }
}

impl ShotSource for FeatureStore {
    fn dim(&self) -> usize {
        FeatureStore::dim(self)
    }

    fn shot_count(&self, video: &str) -> Result<usize> {
        Ok(self.video_rows(video)?.len())
    }

    fn shot_feature(&self, video: &str, index: usize, _mode: &mut Mode<'_>) -> Result<Vec<f32>> {
        let rows = self.video_rows(video)?;
        let row = *rows
            .get(index)
            .ok_or_else(|| Error::Index(format!("shot {index} of video `{video}` with {} shots", rows.len())))?;
        Ok(self.row(row).to_vec())
    }

    fn shot_id(&self, video: &str, index: usize) -> Result<ShotId> {
        let rows = self.video_rows(video)?;
        rows.get(index)
            .map(|&r| self.id(r).clone())
            .ok_or_else(|| Error::Index(format!("shot {index} of video `{video}`")))
    }
}

/// Decoded videos with their shot lists, encoded on demand.
pub struct FrameSource<'a> {
    pub extractor: &'a dyn FrameFeatureExtractor,
    pub m: usize,
    videos: HashMap<String, (FrameSequence, Vec<Shot>)>,
}

impl<'a> FrameSource<'a> {
    pub fn new(extractor: &'a dyn FrameFeatureExtractor, m: usize) -> Self {
        Self {
            extractor,
            m,
            videos: HashMap::new(),
        }
    }

    pub fn add_video(&mut self, video: &str, frames: FrameSequence, shots: Vec<Shot>) -> Result<()> {
        if shots.is_empty() {
            return Err(Error::EmptyInput(format!("video `{video}` has no shots")));
        }
        for s in &shots {
            check_bounds(s, &frames)?;
        }
        self.videos.insert(video.to_string(), (frames, shots));
        Ok(())
    }

    fn video(&self, video: &str) -> Result<&(FrameSequence, Vec<Shot>)> {
        self.videos
            .get(video)
            .ok_or_else(|| Error::Lookup(format!("no frames for video `{video}`")))
    }
}

impl ShotSource for FrameSource<'_> {
    fn dim(&self) -> usize {
        self.extractor.dim()
    }

    fn shot_count(&self, video: &str) -> Result<usize> {
        Ok(self.video(video)?.1.len())
    }

    fn shot_feature(&self, video: &str, index: usize, mode: &mut Mode<'_>) -> Result<Vec<f32>> {
        let (frames, shots) = self.video(video)?;
        let shot = shots
            .get(index)
            .ok_or_else(|| Error::Index(format!("shot {index} of video `{video}` with {} shots", shots.len())))?;
        encode_shot(shot, frames, self.extractor, self.m, mode)
    }

    fn shot_id(&self, video: &str, index: usize) -> Result<ShotId> {
        let (_, shots) = self.video(video)?;
        shots
            .get(index)
            .map(|s| s.id.clone())
            .ok_or_else(|| Error::Index(format!("shot {index} of video `{video}`")))
    }
}

/// Differentiable two-level pooling: `frame_rows` holds `n·m` raw frame
/// features (shot-major), each projected, averaged per shot, then over shots.
pub fn pool_projected<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &Bound,
    projection: &Linear,
    frame_rows: Var,
    m: usize,
) -> Result<Var> {
    let projected = projection.forward(tape, bound, frame_rows)?;
    let shots = tape.mean_row_groups(projected, m)?;
    tape.mean_rows(shots)
}
