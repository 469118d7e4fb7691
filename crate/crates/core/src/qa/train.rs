use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Optimizer, OptimizerKind, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

use super::model::{evaluate_qa, runs_by_key, QaBatch, QaExample, QaModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaTrainConfig {
    pub hidden_widths: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for QaTrainConfig {
    fn default() -> Self {
        Self {
            hidden_widths: vec![256, 64],
            optimizer: OptimizerKind::Adam,
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            momentum: 0.9,
            clip_norm: Some(5.0),
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QaTrainReport {
    pub epoch_losses: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Fits a fresh [`QaModel`]. With validation examples, training stops after
/// `patience` epochs without improvement and the best epoch's parameters are
/// kept.
pub fn train_qa(train: &[QaExample], validation: &[QaExample], config: &QaTrainConfig) -> Result<(QaModel, QaTrainReport)> {
    let first = train
        .first()
        .ok_or_else(|| Error::EmptyInput("qa training needs at least one item".into()))?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut init = derive_rng(config.seed, "qa_init", 0);
    let mut model = QaModel::new(first.clip.len(), first.question.len(), &config.hidden_widths, &mut init)?;
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, config.clip_norm)?;
    let mut report = QaTrainReport::default();
    let mut best: Option<(f64, ParamSet<f32>)> = None;
    let mut stale = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut derive_rng(config.seed, "qa_order", epoch as u64));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut batch: Vec<&QaExample> = chunk.iter().map(|&i| &train[i]).collect();
            batch.sort_by_key(|x| x.answers.len());
            total += step(&mut model, &mut opt, &batch)?;
            batches += 1;
        }
        report.epoch_losses.push(total / batches as f64);
        report.best_epoch = epoch;
        if validation.is_empty() {
            continue;
        }
        let acc = evaluate_qa(&model, validation)?.accuracy();
        report.validation_accuracy.push(acc);
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                report.stopped_early = epoch + 1 < config.epochs;
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        report.best_epoch = report.validation_accuracy.len() - 1 - stale;
        model.params = params;
    }
    Ok((model, report))
}

/// One update on the mean nll over `batch`, sorted so equal answer counts are
/// contiguous.
fn step(model: &mut QaModel, opt: &mut Optimizer<f32>, batch: &[&QaExample]) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let mut loss = None;
    for run in runs_by_key(batch, |x| x.answers.len()) {
        let b = QaBatch::gather(run, &model.layout)?;
        let q = tape.constant(b.queries);
        let a = tape.constant(b.answers);
        let p = model.layout.forward(&mut tape, &bound, q, a, b.n)?;
        let nll = tape.nll_loss(p, &b.targets)?;
        let w = tape.scale(nll, run.len() as f32 / batch.len() as f32);
        loss = Some(match loss {
            Some(acc) => tape.add(acc, w)?,
            None => w,
        });
    }
    let loss = loss.expect("non-empty batch");
    let value = tape.value(loss).item() as f64;
    tape.backward(loss)?;
    opt.step(&mut model.params, &bound.grads(&tape))?;
    Ok(value)
}
