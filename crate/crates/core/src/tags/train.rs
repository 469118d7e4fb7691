use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, Tape, Tensor};
use crate::encoder::{sample_shots, Mode, ShotSource};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

use super::model::{multitask_loss, LabelSet, Scoring, TagModel, SEQ_GENRE, SEQ_KEYWORD, SEQ_LSTM};
use super::TagVocabulary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagTrainConfig {
    /// `D′`; `0` trains the heads directly on the raw features.
    pub proj_dim: usize,
    pub lambda: f64,
    pub scoring: Scoring,
    /// Shots sampled per video at every step.
    pub shots_per_video: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    /// Hidden width of the Feature+LSTM head; `0` skips it.
    pub lstm_hidden: usize,
    pub lstm_epochs: usize,
    pub seed: u64,
}

impl Default for TagTrainConfig {
    fn default() -> Self {
        Self {
            proj_dim: 64,
            lambda: 0.5,
            scoring: Scoring::Sigmoid,
            shots_per_video: 8,
            epochs: 100,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            momentum: 0.9,
            clip_norm: Some(5.0),
            lstm_hidden: 32,
            lstm_epochs: 15,
            seed: 0,
        }
    }
}

/// A training video and its labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledVideo {
    pub id: String,
    pub labels: LabelSet,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TagTrainReport {
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub sequence_epoch_losses: Vec<f64>,
}

fn validate(videos: &[LabeledVideo], config: &TagTrainConfig) -> Result<()> {
    if videos.is_empty() {
        return Err(Error::EmptyInput("tag training needs at least one video".into()));
    }
    if let Some(v) = videos.iter().find(|v| v.labels.genres.is_empty()) {
        return Err(Error::Config(format!("training video `{}` has no genre", v.id)));
    }
    if config.batch_size == 0 || config.shots_per_video == 0 {
        return Err(Error::Config("batch_size and shots_per_video must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(Error::Config(format!("lambda {} outside [0,1]", config.lambda)));
    }
    Ok(())
}

fn epoch_order(n: usize, seed: u64, purpose: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derive_rng(seed, purpose, epoch as u64));
    order
}

fn rows_tensor(rows: &[Vec<f32>], dim: usize) -> Result<Tensor<f32>> {
    Tensor::matrix(rows.len(), dim, rows.concat())
}

/// Fits a fresh [`TagModel`] (and, if configured, its sequence head) by
/// minibatch gradient descent on pooled features of freshly sampled shots.
pub fn train_tags(
    source: &dyn ShotSource,
    videos: &[LabeledVideo],
    vocab: &TagVocabulary,
    config: &TagTrainConfig,
) -> Result<(TagModel, TagTrainReport)> {
    validate(videos, config)?;
    let mut init = derive_rng(config.seed, "tag_init", 0);
    let mut model = TagModel::new(source.dim(), config.proj_dim, vocab, config.scoring, &mut init)?;
    let mut report = TagTrainReport {
        epoch_losses: train_pooled(&mut model, source, videos, config)?,
        ..Default::default()
    };
    if config.lstm_hidden > 0 && config.lstm_epochs > 0 {
        model
            .layout
            .add_sequence(&mut model.params, config.lstm_hidden, &mut init)?;
        report.sequence_epoch_losses = train_sequence_head(&mut model, source, videos, config)?;
    }
    Ok((model, report))
}

/// Continues training the projection and pooled heads of `model`.
pub fn train_pooled(
    model: &mut TagModel,
    source: &dyn ShotSource,
    videos: &[LabeledVideo],
    config: &TagTrainConfig,
) -> Result<Vec<f64>> {
    validate(videos, config)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, config.clip_norm)?;
    let dim = source.dim();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = epoch_order(videos.len(), config.seed, "tag_order", epoch);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let features: Vec<Vec<f32>> = batch
                .par_iter()
                .enumerate()
                .map(|(p, &v)| {
                    let ordinal = ((epoch * videos.len()) + b * config.batch_size + p) as u64;
                    let mut rng = derive_rng(config.seed, "tag_sample", ordinal);
                    source.video_feature(&videos[v].id, config.shots_per_video, &mut Mode::Train(&mut rng))
                })
                .collect::<Result<_>>()?;
            let truths: Vec<LabelSet> = batch.iter().map(|&v| videos[v].labels.clone()).collect();
            let mut tape = Tape::new();
            let bound = model.params.bind(&mut tape);
            let x = tape.constant(rows_tensor(&features, dim)?);
            let (g, k) = model.layout.logits(&mut tape, &bound, x)?;
            let loss = multitask_loss(&mut tape, g, k, &truths, config.lambda, config.scoring)?;
            total += tape.value(loss).item() as f64;
            batches += 1;
            tape.backward(loss)?;
            opt.step(&mut model.params, &bound.grads(&tape))?;
        }
        losses.push(total / batches as f64);
    }
    Ok(losses)
}

/// Trains only the sequence head on ordered runs of `shots_per_video` sampled
/// shots, with the multitask loss averaged over time steps. The projection and
/// pooled heads stay fixed.
pub fn train_sequence_head(
    model: &mut TagModel,
    source: &dyn ShotSource,
    videos: &[LabeledVideo],
    config: &TagTrainConfig,
) -> Result<Vec<f64>> {
    validate(videos, config)?;
    if model.layout.sequence.is_none() {
        return Err(Error::Config("model has no Feature+LSTM head to train".into()));
    }
    let trainable: Vec<bool> = model
        .params
        .iter()
        .map(|(name, _)| [SEQ_LSTM, SEQ_GENRE, SEQ_KEYWORD].iter().any(|p| name.starts_with(p)))
        .collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, config.clip_norm)?;
    let dim = source.dim();
    let steps = config.shots_per_video;
    let mut losses = Vec::with_capacity(config.lstm_epochs);
    for epoch in 0..config.lstm_epochs {
        let order = epoch_order(videos.len(), config.seed, "tag_seq_order", epoch);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let sequences: Vec<Vec<Vec<f32>>> = batch
                .par_iter()
                .enumerate()
                .map(|(p, &v)| {
                    let ordinal = ((epoch * videos.len()) + b * config.batch_size + p) as u64;
                    let mut rng = derive_rng(config.seed, "tag_seq_sample", ordinal);
                    let mut mode = Mode::Train(&mut rng);
                    let id = &videos[v].id;
                    sample_shots(source.shot_count(id)?, steps, &mut mode)?
                        .into_iter()
                        .map(|i| source.shot_feature(id, i, &mut mode))
                        .collect()
                })
                .collect::<Result<_>>()?;
            let truths: Vec<LabelSet> = batch.iter().map(|&v| videos[v].labels.clone()).collect();
            let mut tape = Tape::new();
            let bound = model.params.bind(&mut tape);
            let inputs = (0..steps)
                .map(|t| {
                    let rows: Vec<Vec<f32>> = sequences.iter().map(|s| s[t].clone()).collect();
                    Ok(tape.constant(rows_tensor(&rows, dim)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let per_step = model.layout.sequence_logits(&mut tape, &bound, &inputs)?;
            let mut loss = None;
            for (g, k) in per_step {
                let l = multitask_loss(&mut tape, g, k, &truths, config.lambda, config.scoring)?;
                loss = Some(match loss {
                    Some(acc) => tape.add(acc, l)?,
                    None => l,
                });
            }
            let loss = tape.scale(loss.expect("at least one step"), 1.0 / steps as f32);
            total += tape.value(loss).item() as f64;
            batches += 1;
            tape.backward(loss)?;
            let grads: Vec<_> = bound
                .grads(&tape)
                .into_iter()
                .zip(&trainable)
                .map(|(g, &t)| if t { g } else { None })
                .collect();
            opt.step(&mut model.params, &grads)?;
        }
        losses.push(total / batches as f64);
    }
    Ok(losses)
}
