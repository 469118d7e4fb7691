use crate::encoder::ShotSource;
use crate::error::Result;
use crate::segmentation::ShotId;

use super::{rank_labels, TagModel, TagVocabulary};

/// Score of one tag on every shot of a video, in shot order.
pub fn shot_tag_response(
    model: &TagModel,
    vocab: &TagVocabulary,
    source: &dyn ShotSource,
    video: &str,
    tag: &str,
) -> Result<Vec<(ShotId, f32)>> {
    let (branch, label) = vocab.resolve(tag)?;
    let shots = source.all_shots(video)?;
    let scores = model.predict_rows(&shots)?;
    scores
        .into_iter()
        .enumerate()
        .map(|(i, (g, k))| {
            let s = match branch {
                super::Branch::Genre => g[label],
                super::Branch::Keyword => k[label],
            };
            Ok((source.shot_id(video, i)?, s))
        })
        .collect()
}

/// The `k` highest-scoring entries of a response series, ties to the earlier shot.
pub fn top_shots(series: &[(ShotId, f32)], k: usize) -> Vec<(ShotId, f32)> {
    let scores: Vec<f32> = series.iter().map(|(_, s)| *s).collect();
    rank_labels(&scores)
        .into_iter()
        .take(k)
        .map(|i| series[i].clone())
        .collect()
}
