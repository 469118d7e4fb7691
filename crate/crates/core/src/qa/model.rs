use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::autodiff::{Bound, ParamSet, Scalar, Tape, Tensor, Var};
use crate::encoder::{mean_of, FeatureStore};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::segmentation::ShotId;
use crate::temporal::argmax;

use super::{EmbeddingProvider, QaItem};

pub(crate) const QA_SCORER: &str = "qa";

/// Mean of the clip's shot features.
pub fn encode_clip(clip: &[ShotId], store: &FeatureStore) -> Result<Vec<f32>> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("empty clip".into()));
    }
    let rows = clip.iter().map(|id| store.get(id).map(<[f32]>::to_vec)).collect::<Result<Vec<_>>>()?;
    Ok(mean_of(rows.into_iter(), store.dim()))
}

/// An item with every text and the clip already embedded.
#[derive(Clone, Debug, PartialEq)]
pub struct QaExample {
    pub qid: String,
    pub clip: Vec<f32>,
    pub question: Vec<f32>,
    pub answers: Vec<Vec<f32>>,
    pub correct_index: usize,
}

pub fn prepare_item(item: &QaItem, provider: &dyn EmbeddingProvider, store: &FeatureStore) -> Result<QaExample> {
    item.validate()?;
    Ok(QaExample {
        qid: item.qid.clone(),
        clip: encode_clip(&item.clip, store)?,
        question: provider.embed(&item.question),
        answers: item.answers.iter().map(|a| provider.embed(a)).collect(),
        correct_index: item.correct_index,
    })
}

/// Embeds items in parallel, keeping order.
pub fn prepare_items(items: &[QaItem], provider: &dyn EmbeddingProvider, store: &FeatureStore) -> Result<Vec<QaExample>> {
    items.par_iter().map(|i| prepare_item(i, provider, store)).collect()
}

/// Shared scorer over rows `[clip ‖ question ‖ answer_i]`.
#[derive(Clone, Debug)]
pub struct QaLayout {
    pub scorer: Mlp,
    pub clip_dim: usize,
    pub embed_dim: usize,
}

impl QaLayout {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        clip_dim: usize,
        embed_dim: usize,
        hidden_widths: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let widths: Vec<usize> = std::iter::once(clip_dim + 2 * embed_dim)
            .chain(hidden_widths.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let scorer = Mlp::new(params, QA_SCORER, &widths, rng)?;
        Ok(Self {
            scorer,
            clip_dim,
            embed_dim,
        })
    }

    /// The split of the scorer input between clip and text is not recoverable
    /// from the weights alone, so `embed_dim` is given.
    pub fn from_params<T: Scalar>(params: &ParamSet<T>, embed_dim: usize) -> Result<Self> {
        let scorer = Mlp::from_params(params, QA_SCORER)?;
        let clip_dim = scorer
            .input()
            .checked_sub(2 * embed_dim)
            .filter(|&d| d > 0 && scorer.output() == 1)
            .ok_or_else(|| Error::shape("qa scorer", &[scorer.input(), scorer.output()], &[2 * embed_dim, 1]))?;
        Ok(Self {
            scorer,
            clip_dim,
            embed_dim,
        })
    }

    /// `queries` is `B×(D′+E)` (clip then question), `answers` `(B·n)×E`.
    /// Returns `B×n` answer distributions.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        queries: Var,
        answers: Var,
        n: usize,
    ) -> Result<Var> {
        let logits = self.scorer.choice_logits(tape, bound, queries, answers, n)?;
        tape.softmax_rows(logits)
    }
}

/// Batched tensors for examples sharing an answer count.
pub(crate) struct QaBatch {
    pub queries: Tensor<f32>,
    pub answers: Tensor<f32>,
    pub n: usize,
    pub targets: Vec<usize>,
}

impl QaBatch {
    pub fn gather(examples: &[&QaExample], layout: &QaLayout) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::EmptyInput("empty qa batch".into()))?;
        let (n, d, e) = (first.answers.len(), layout.clip_dim, layout.embed_dim);
        let mut queries = Vec::with_capacity(examples.len() * (d + e));
        let mut answers = Vec::with_capacity(examples.len() * n * e);
        for ex in examples {
            if ex.answers.len() != n {
                return Err(Error::shape("qa batch", &[ex.answers.len()], &[n]));
            }
            if ex.clip.len() != d || ex.question.len() != e || ex.answers.iter().any(|a| a.len() != e) {
                return Err(Error::shape("qa example", &[ex.clip.len(), ex.question.len()], &[d, e]));
            }
            queries.extend_from_slice(&ex.clip);
            queries.extend_from_slice(&ex.question);
            ex.answers.iter().for_each(|a| answers.extend_from_slice(a));
        }
        Ok(Self {
            queries: Tensor::matrix(examples.len(), d + e, queries)?,
            answers: Tensor::matrix(examples.len() * n, e, answers)?,
            n,
            targets: examples.iter().map(|x| x.correct_index).collect(),
        })
    }
}

/// Splits `items` into maximal runs with equal `key`, preserving order.
pub(crate) fn runs_by_key<'a, X, K: PartialEq>(items: &'a [&'a X], key: impl Fn(&X) -> K) -> Vec<&'a [&'a X]> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < items.len() {
        let k = key(items[start]);
        let mut end = start + 1;
        while end < items.len() && key(items[end]) == k {
            end += 1;
        }
        out.push(&items[start..end]);
        start = end;
    }
    out
}

#[derive(Clone, Debug)]
pub struct QaModel {
    pub params: ParamSet<f32>,
    pub layout: QaLayout,
}

impl QaModel {
    pub fn new<R: Rng + ?Sized>(clip_dim: usize, embed_dim: usize, hidden_widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = ParamSet::new();
        let layout = QaLayout::new(&mut params, clip_dim, embed_dim, hidden_widths, rng)?;
        Ok(Self { params, layout })
    }

    pub fn from_params(params: ParamSet<f32>, embed_dim: usize) -> Result<Self> {
        let layout = QaLayout::from_params(&params, embed_dim)?;
        Ok(Self { params, layout })
    }

    /// Answer distributions in example order; examples may mix answer counts.
    pub fn distributions(&self, examples: &[&QaExample]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(examples.len());
        for run in runs_by_key(examples, |x| x.answers.len()) {
            let batch = QaBatch::gather(run, &self.layout)?;
            let mut tape = Tape::new();
            let bound = self.params.bind_frozen(&mut tape);
            let q = tape.constant(batch.queries);
            let a = tape.constant(batch.answers);
            let p = self.layout.forward(&mut tape, &bound, q, a, batch.n)?;
            let p = tape.value(p);
            out.extend((0..run.len()).map(|i| p.row(i).to_vec()));
        }
        Ok(out)
    }

    pub fn answer(&self, example: &QaExample) -> Result<usize> {
        Ok(argmax(&self.distributions(&[example])?[0]))
    }
}

/// Embeds `item` and returns its answer distribution.
pub fn qa_forward(
    item: &QaItem,
    provider: &dyn EmbeddingProvider,
    store: &FeatureStore,
    model: &QaModel,
) -> Result<Vec<f32>> {
    let ex = prepare_item(item, provider, store)?;
    Ok(model.distributions(&[&ex])?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QaOutcome {
    pub qid: String,
    pub chosen: usize,
    pub probability: f32,
    pub correct: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QaReport {
    pub outcomes: Vec<QaOutcome>,
}

impl QaReport {
    pub fn accuracy(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().filter(|o| o.correct).count() as f64 / self.outcomes.len() as f64
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

/// Scores examples in parallel chunks; outcomes keep example order.
pub fn evaluate_qa(model: &QaModel, examples: &[QaExample]) -> Result<QaReport> {
    let refs: Vec<&QaExample> = examples.iter().collect();
    let chunks: Vec<Vec<QaOutcome>> = refs
        .par_chunks(64)
        .map(|chunk| {
            let dists = model.distributions(chunk)?;
            Ok(chunk
                .iter()
                .zip(dists)
                .map(|(ex, d)| {
                    let chosen = argmax(&d);
                    QaOutcome {
                        qid: ex.qid.clone(),
                        chosen,
                        probability: d[chosen],
                        correct: chosen == ex.correct_index,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(QaReport {
        outcomes: chunks.into_iter().flatten().collect(),
    })
}
