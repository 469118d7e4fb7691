use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::encoder::FeatureStore;
use crate::error::Result;

use super::model::{argmax, CandidateChooser};
use super::{PredictionQuestion, Setting};

/// Questions scored per chooser call.
pub const EVAL_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionOutcome {
    pub qid: String,
    pub setting: Setting,
    pub chosen: usize,
    /// Probability the chooser put on `chosen`.
    pub probability: f32,
    pub correct: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccuracyReport {
    pub outcomes: Vec<QuestionOutcome>,
}

impl AccuracyReport {
    /// Fraction answered correctly; 0 for an empty set.
    pub fn accuracy(&self) -> f64 {
        ratio(self.outcomes.iter().filter(|o| o.correct).count(), self.outcomes.len())
    }

    /// `(correct, total)` per setting present.
    pub fn counts_by_setting(&self) -> BTreeMap<Setting, (usize, usize)> {
        let mut out: BTreeMap<Setting, (usize, usize)> = BTreeMap::new();
        for o in &self.outcomes {
            let e = out.entry(o.setting).or_default();
            e.0 += o.correct as usize;
            e.1 += 1;
        }
        out
    }

    pub fn accuracy_by_setting(&self) -> BTreeMap<Setting, f64> {
        self.counts_by_setting()
            .into_iter()
            .map(|(s, (c, t))| (s, ratio(c, t)))
            .collect()
    }

    /// `qid\tchosen\tprobability` lines.
    pub fn format_results(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let _ = writeln!(out, "{}\t{}\t{:.6}", o.qid, o.chosen, o.probability);
        }
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores every question with `chooser` and records the argmax. Batches are
/// scored in parallel; outcomes keep question order.
pub fn evaluate_accuracy(
    chooser: &dyn CandidateChooser,
    questions: &[PredictionQuestion],
    store: &FeatureStore,
) -> Result<AccuracyReport> {
    let refs: Vec<&PredictionQuestion> = questions.iter().collect();
    let batches: Vec<Vec<QuestionOutcome>> = refs
        .par_chunks(EVAL_BATCH)
        .map(|chunk| score_chunk(chooser, chunk, store))
        .collect::<Result<_>>()?;
    Ok(AccuracyReport {
        outcomes: batches.into_iter().flatten().collect(),
    })
}

fn score_chunk(
    chooser: &dyn CandidateChooser,
    chunk: &[&PredictionQuestion],
    store: &FeatureStore,
) -> Result<Vec<QuestionOutcome>> {
    // a batch must share context length and candidate count
    let mut out = Vec::with_capacity(chunk.len());
    let mut start = 0;
    while start < chunk.len() {
        let shape = (chunk[start].context.len(), chunk[start].candidates.len());
        let mut end = start + 1;
        while end < chunk.len() && (chunk[end].context.len(), chunk[end].candidates.len()) == shape {
            end += 1;
        }
        let dists = chooser.distributions(&chunk[start..end], store)?;
        for (q, dist) in chunk[start..end].iter().zip(dists) {
            let chosen = argmax(&dist);
            out.push(QuestionOutcome {
                qid: q.qid.clone(),
                setting: q.setting,
                chosen,
                probability: dist[chosen],
                correct: chosen == q.correct_index,
            });
        }
        start = end;
    }
    Ok(out)
}
