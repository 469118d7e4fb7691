use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, ParamSet, Tape};
use crate::encoder::FeatureStore;
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::segmentation::ShotId;

use super::eval::evaluate_accuracy;
use super::model::{ContextReadout, NextShotModel, QuestionBatch};
use super::PredictionQuestion;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalTrainConfig {
    /// LSTM hidden width `H`.
    pub hidden: usize,
    /// Scorer widths between `H+D′` and the final score.
    pub scorer_widths: Vec<usize>,
    pub readout: ContextReadout,
    /// Standardize features with statistics of the training shots.
    pub standardize: bool,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TemporalTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            scorer_widths: vec![256, 64],
            readout: ContextReadout::Final,
            standardize: true,
            optimizer: OptimizerKind::Adam,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            clip_norm: Some(5.0),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TemporalTrainReport {
    pub epoch_losses: Vec<f64>,
    /// Empty when no validation questions were given.
    pub validation_accuracy: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Trains a fresh [`NextShotModel`] on frozen features. With validation
/// questions, the parameters from the epoch with the best validation accuracy
/// (earliest on ties) are returned; otherwise the final ones.
pub fn train_next_shot(
    train: &[PredictionQuestion],
    validation: &[PredictionQuestion],
    store: &FeatureStore,
    config: &TemporalTrainConfig,
) -> Result<(NextShotModel, TemporalTrainReport)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("next-shot training needs at least one question".into()));
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::Config("batch_size and hidden must be positive".into()));
    }
    let mut init = derive_rng(config.seed, "temporal_init", 0);
    let mut model = NextShotModel::new(store.dim(), config.hidden, &config.scorer_widths, config.readout, &mut init)?;
    if config.standardize {
        let mut shots: Vec<&ShotId> = train.iter().flat_map(|q| q.context.iter().chain(&q.candidates)).collect();
        shots.sort_unstable_by(|a, b| (&a.video, a.ordinal).cmp(&(&b.video, b.ordinal)));
        shots.dedup();
        let rows = shots.into_iter().map(|id| store.get(id)).collect::<Result<Vec<_>>>()?;
        model.fit_input_norm(rows)?;
    }
    let report = continue_training(&mut model, train, validation, store, config)?;
    Ok((model, report))
}

/// Runs `config.epochs` more epochs on an existing model.
pub fn continue_training(
    model: &mut NextShotModel,
    train: &[PredictionQuestion],
    validation: &[PredictionQuestion],
    store: &FeatureStore,
    config: &TemporalTrainConfig,
) -> Result<TemporalTrainReport> {
    if train.is_empty() {
        return Err(Error::EmptyInput("next-shot training needs at least one question".into()));
    }
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, config.clip_norm)?;
    let mut report = TemporalTrainReport::default();
    let mut best: Option<(f64, ParamSet<f32>)> = None;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derive_rng(config.seed, "temporal_order", epoch as u64));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let questions: Vec<&PredictionQuestion> = chunk.iter().map(|&i| &train[i]).collect();
            total += step(model, &mut opt, &questions, store)?;
            batches += 1;
        }
        report.epoch_losses.push(total / batches as f64);
        if !validation.is_empty() {
            let acc = evaluate_accuracy(model, validation, store)?.accuracy();
            report.validation_accuracy.push(acc);
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                best = Some((acc, model.params.clone()));
                report.best_epoch = epoch;
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(report)
}

/// One SGD step on the mean nll of a batch; mixed shapes are split into
/// same-shape groups whose losses are averaged by question count.
fn step(
    model: &mut NextShotModel,
    opt: &mut Optimizer<f32>,
    questions: &[&PredictionQuestion],
    store: &FeatureStore,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let mut groups: Vec<Vec<&PredictionQuestion>> = Vec::new();
    for &q in questions {
        let shape = (q.context.len(), q.candidates.len());
        match groups
            .iter_mut()
            .find(|g| (g[0].context.len(), g[0].candidates.len()) == shape)
        {
            Some(g) => g.push(q),
            None => groups.push(vec![q]),
        }
    }
    let mut loss = None;
    for group in &groups {
        let batch = QuestionBatch::gather(group, store, |r| model.normalize(r))?;
        let ctx: Vec<_> = batch.context.into_iter().map(|t| tape.constant(t)).collect();
        let cands = tape.constant(batch.candidates);
        let probs = model.layout.forward(&mut tape, &bound, &ctx, cands, batch.n)?;
        let nll = tape.nll_loss(probs, &batch.targets)?;
        let weighted = tape.scale(nll, group.len() as f32 / questions.len() as f32);
        loss = Some(match loss {
            Some(acc) => tape.add(acc, weighted)?,
            None => weighted,
        });
    }
    let loss = loss.expect("non-empty batch");
    let value = tape.value(loss).item() as f64;
    tape.backward(loss)?;
    opt.step(&mut model.params, &bound.grads(&tape))?;
    Ok(value)
}
