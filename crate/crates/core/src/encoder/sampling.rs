use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::segmentation::Shot;

/// Evaluation sampling is fixed; training sampling draws from the given stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// `m` frame indices, one per equal segment of the shot: the segment center
/// `start + ⌊(i+½)·len/m⌋` in eval mode, a uniform draw inside the segment in
/// train mode. Shots shorter than `m` repeat frames.
pub fn sample_frames(shot: &Shot, m: usize, mode: &mut Mode<'_>) -> Vec<usize> {
    let len = shot.len();
    (0..m)
        .map(|i| match mode {
            Mode::Eval => shot.start + (2 * i + 1) * len / (2 * m),
            Mode::Train(rng) => {
                let lo = shot.start + i * len / m;
                let hi = (shot.start + (i + 1) * len / m).max(lo + 1);
                rng.random_range(lo..hi)
            }
        })
        .collect()
}

/// `n` indices into a video's `shot_count` shots, ascending. Eval mode spaces
/// them as `⌊i·N/n⌋`; train mode draws without replacement when `N ≥ n` and
/// with replacement otherwise.
pub fn sample_shots(shot_count: usize, n: usize, mode: &mut Mode<'_>) -> Result<Vec<usize>> {
    if shot_count == 0 {
        return Err(Error::EmptyInput("cannot sample shots from a video without shots".into()));
    }
    let mut picked: Vec<usize> = match mode {
        Mode::Eval => (0..n).map(|i| i * shot_count / n).collect(),
        Mode::Train(rng) if shot_count >= n => index::sample(rng, shot_count, n).into_vec(),
        Mode::Train(rng) => (0..n).map(|_| rng.random_range(0..shot_count)).collect(),
    };
    picked.sort_unstable();
    Ok(picked)
}
