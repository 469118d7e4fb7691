use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{softmax_in_place, Bound, ParamId, ParamSet, Scalar, Tape, Tensor, Var};
use crate::encoder::FeatureStore;
use crate::error::{Error, Result};
use crate::nn::{Lstm, Mlp};

use super::PredictionQuestion;

pub(crate) const CONTEXT_LSTM: &str = "context";
pub(crate) const SCORER: &str = "scorer";
pub(crate) const INPUT_MEAN: &str = "input.mean";
pub(crate) const INPUT_SCALE: &str = "input.scale";

/// How the context encoding `u` is read off the LSTM.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextReadout {
    /// Hidden state after the last context shot.
    #[default]
    Final,
    /// Mean of the hidden states over all context shots.
    Mean,
}

/// LSTM context encoder plus a candidate scorer shared across candidate rows.
#[derive(Clone, Debug)]
pub struct NextShotLayout {
    pub lstm: Lstm,
    pub scorer: Mlp,
    pub readout: ContextReadout,
    /// Frozen per-dimension `(mean, 1/std)` applied to features before they
    /// reach the tape.
    pub input_norm: Option<(ParamId, ParamId)>,
}

impl NextShotLayout {
    /// `scorer_widths` are the hidden widths between `H+D′` and the final 1.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        feature_dim: usize,
        hidden: usize,
        scorer_widths: &[usize],
        readout: ContextReadout,
        rng: &mut R,
    ) -> Result<Self> {
        let lstm = Lstm::new(params, CONTEXT_LSTM, feature_dim, hidden, rng)?;
        let widths: Vec<usize> = std::iter::once(hidden + feature_dim)
            .chain(scorer_widths.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let scorer = Mlp::new(params, SCORER, &widths, rng)?;
        Ok(Self {
            lstm,
            scorer,
            readout,
            input_norm: None,
        })
    }

    pub fn from_params<T: Scalar>(params: &ParamSet<T>, readout: ContextReadout) -> Result<Self> {
        let lstm = Lstm::from_params(params, CONTEXT_LSTM)?;
        let scorer = Mlp::from_params(params, SCORER)?;
        if scorer.input() != lstm.hidden + lstm.input || scorer.output() != 1 {
            return Err(Error::shape(
                "next-shot scorer",
                &[scorer.input(), scorer.output()],
                &[lstm.hidden + lstm.input, 1],
            ));
        }
        let input_norm = match (params.id(INPUT_MEAN), params.id(INPUT_SCALE)) {
            (Ok(m), Ok(s)) => {
                let d = lstm.input;
                if params.get(m).len() != d || params.get(s).len() != d {
                    return Err(Error::shape("input standardizer", &[params.get(m).len()], &[d]));
                }
                Some((m, s))
            }
            _ => None,
        };
        Ok(Self {
            lstm,
            scorer,
            readout,
            input_norm,
        })
    }

    /// Installs (or overwrites) the frozen standardizer.
    pub fn set_input_norm<T: Scalar>(&mut self, params: &mut ParamSet<T>, mean: Vec<T>, scale: Vec<T>) -> Result<()> {
        let d = self.feature_dim();
        if mean.len() != d || scale.len() != d {
            return Err(Error::shape("input standardizer", &[mean.len(), scale.len()], &[d, d]));
        }
        match self.input_norm {
            Some((m, s)) => {
                *params.get_mut(m) = Tensor::vector(mean);
                *params.get_mut(s) = Tensor::vector(scale);
            }
            None => {
                let m = params.add(INPUT_MEAN, Tensor::vector(mean))?;
                let s = params.add(INPUT_SCALE, Tensor::vector(scale))?;
                self.input_norm = Some((m, s));
            }
        }
        Ok(())
    }

    /// Standardized copy of `row` (the row itself without a standardizer).
    pub fn normalize<T: Scalar>(&self, params: &ParamSet<T>, row: &[T]) -> Vec<T> {
        match self.input_norm {
            None => row.to_vec(),
            Some((m, s)) => row
                .iter()
                .zip(params.get(m).data())
                .zip(params.get(s).data())
                .map(|((&x, &mu), &k)| (x - mu) * k)
                .collect(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.lstm.input
    }

    /// `u` for a batch: `context[t]` holds the `t`-th context shot of every
    /// question as a `B×D′` matrix.
    pub fn encode_context<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, context: &[Var]) -> Result<Var> {
        let hidden = self.lstm.run(tape, bound, context)?;
        match self.readout {
            ContextReadout::Final => Ok(*hidden.last().expect("non-empty run")),
            ContextReadout::Mean => {
                let mut acc = hidden[0];
                for &h in &hidden[1..] {
                    acc = tape.add(acc, h)?;
                }
                Ok(tape.scale(acc, T::from_f64(1.0 / hidden.len() as f64)))
            }
        }
    }

    /// Pre-softmax scores `B×n`: each `u` is repeated `n` times, joined with
    /// its candidates (`(B·n)×D′`, question-major) and scored row by row.
    pub fn candidate_logits<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        u: Var,
        candidates: Var,
        n: usize,
    ) -> Result<Var> {
        self.scorer.choice_logits(tape, bound, u, candidates, n)
    }

    /// Candidate distributions `B×n`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        context: &[Var],
        candidates: Var,
        n: usize,
    ) -> Result<Var> {
        let u = self.encode_context(tape, bound, context)?;
        let logits = self.candidate_logits(tape, bound, u, candidates, n)?;
        tape.softmax_rows(logits)
    }
}

/// Feature tensors for a batch of questions sharing context length and
/// candidate count.
pub struct QuestionBatch {
    pub context: Vec<Tensor<f32>>,
    pub candidates: Tensor<f32>,
    pub n: usize,
    pub targets: Vec<usize>,
}

impl QuestionBatch {
    /// `normalize` maps each stored feature row to the model's input space.
    pub fn gather(
        questions: &[&PredictionQuestion],
        store: &FeatureStore,
        normalize: impl Fn(&[f32]) -> Vec<f32>,
    ) -> Result<Self> {
        let first = questions
            .first()
            .ok_or_else(|| Error::EmptyInput("empty question batch".into()))?;
        let (m, n, d) = (first.context.len(), first.candidates.len(), store.dim());
        if m == 0 || n == 0 {
            return Err(Error::EmptyInput(format!("question {} has no context or candidates", first.qid)));
        }
        let mut context: Vec<Vec<f32>> = vec![Vec::with_capacity(questions.len() * d); m];
        let mut candidates = Vec::with_capacity(questions.len() * n * d);
        for q in questions {
            if q.context.len() != m || q.candidates.len() != n {
                return Err(Error::shape(
                    "question batch",
                    &[q.context.len(), q.candidates.len()],
                    &[m, n],
                ));
            }
            for (t, id) in q.context.iter().enumerate() {
                context[t].extend(normalize(store.get(id)?));
            }
            for id in &q.candidates {
                candidates.extend(normalize(store.get(id)?));
            }
        }
        let b = questions.len();
        Ok(Self {
            context: context
                .into_iter()
                .map(|rows| Tensor::matrix(b, d, rows))
                .collect::<Result<_>>()?,
            candidates: Tensor::matrix(b * n, d, candidates)?,
            n,
            targets: questions.iter().map(|q| q.correct_index).collect(),
        })
    }
}

/// Anything that can put a distribution over a question's candidates.
pub trait CandidateChooser: Sync {
    /// One distribution per question, in order.
    fn distributions(&self, questions: &[&PredictionQuestion], store: &FeatureStore) -> Result<Vec<Vec<f32>>>;
}

/// First index of the maximum.
pub fn argmax(scores: &[f32]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The trained next-shot model.
#[derive(Clone, Debug)]
pub struct NextShotModel {
    pub params: ParamSet<f32>,
    pub layout: NextShotLayout,
}

impl NextShotModel {
    pub fn new<R: Rng + ?Sized>(
        feature_dim: usize,
        hidden: usize,
        scorer_widths: &[usize],
        readout: ContextReadout,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        let layout = NextShotLayout::new(&mut params, feature_dim, hidden, scorer_widths, readout, rng)?;
        Ok(Self { params, layout })
    }

    pub fn from_params(params: ParamSet<f32>, readout: ContextReadout) -> Result<Self> {
        let layout = NextShotLayout::from_params(&params, readout)?;
        Ok(Self { params, layout })
    }

    pub fn normalize(&self, row: &[f32]) -> Vec<f32> {
        self.layout.normalize(&self.params, row)
    }

    /// Fits the frozen standardizer to `rows`; dimensions with (near) zero
    /// spread are only centred.
    pub fn fit_input_norm<'a>(&mut self, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<()> {
        let d = self.layout.feature_dim();
        let (mut sum, mut sq, mut count) = (vec![0.0f64; d], vec![0.0f64; d], 0usize);
        for row in rows {
            if row.len() != d {
                return Err(Error::shape("fit_input_norm", &[row.len()], &[d]));
            }
            for (j, &x) in row.iter().enumerate() {
                sum[j] += x as f64;
                sq[j] += (x as f64) * (x as f64);
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyInput("no rows to fit the standardizer".into()));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n - m * m).max(0.0).sqrt();
                if sd > 1e-6 { (1.0 / sd) as f32 } else { 1.0 }
            })
            .collect();
        self.layout
            .set_input_norm(&mut self.params, mean.iter().map(|&m| m as f32).collect(), scale)
    }

    /// Candidate distribution given raw context and candidate features.
    pub fn score_candidates(&self, context: &[Vec<f32>], candidates: &[Vec<f32>]) -> Result<Vec<f32>> {
        if context.is_empty() {
            return Err(Error::EmptyInput("empty context".into()));
        }
        if candidates.is_empty() {
            return Err(Error::EmptyInput("no candidates".into()));
        }
        let d = self.layout.feature_dim();
        let row = |r: &Vec<f32>| -> Result<Tensor<f32>> { Tensor::matrix(1, d, self.normalize(r)) };
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let ctx = context
            .iter()
            .map(|r| Ok(tape.constant(row(r)?)))
            .collect::<Result<Vec<_>>>()?;
        let cands = Tensor::matrix(candidates.len(), d, candidates.iter().flat_map(|c| self.normalize(c)).collect())
            .map_err(|_| Error::shape("score_candidates", &[candidates.len()], &[d]))?;
        let cv = tape.constant(cands);
        let probs = self.layout.forward(&mut tape, &bound, &ctx, cv, candidates.len())?;
        Ok(tape.value(probs).data().to_vec())
    }

    /// The context encoding `u` of one sequence.
    pub fn encode_context(&self, context: &[Vec<f32>]) -> Result<Vec<f32>> {
        let d = self.layout.feature_dim();
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let ctx = context
            .iter()
            .map(|r| Ok(tape.constant(Tensor::matrix(1, d, self.normalize(r))?)))
            .collect::<Result<Vec<_>>>()?;
        let u = self.layout.encode_context(&mut tape, &bound, &ctx)?;
        Ok(tape.value(u).data().to_vec())
    }

    /// Index of the most probable candidate.
    pub fn answer(&self, question: &PredictionQuestion, store: &FeatureStore) -> Result<usize> {
        Ok(argmax(&self.distributions(&[question], store)?[0]))
    }
}

impl CandidateChooser for NextShotModel {
    fn distributions(&self, questions: &[&PredictionQuestion], store: &FeatureStore) -> Result<Vec<Vec<f32>>> {
        let batch = QuestionBatch::gather(questions, store, |r| self.normalize(r))?;
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let ctx: Vec<Var> = batch.context.into_iter().map(|t| tape.constant(t)).collect();
        let cands = tape.constant(batch.candidates);
        let probs = self.layout.forward(&mut tape, &bound, &ctx, cands, batch.n)?;
        let p = tape.value(probs);
        Ok((0..questions.len()).map(|i| p.row(i).to_vec()).collect())
    }
}

/// Picks the candidate with the highest cosine similarity to the mean context
/// feature. Zero-norm candidates never win unless every candidate is zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct AverageCosineBaseline;

impl AverageCosineBaseline {
    pub fn similarities(context: &[&[f32]], candidates: &[&[f32]]) -> Vec<f64> {
        let d = context.first().map_or(0, |c| c.len());
        let mut mean = vec![0.0f64; d];
        for c in context {
            mean.iter_mut().zip(c.iter()).for_each(|(m, &x)| *m += x as f64);
        }
        let k = context.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= k);
        let mean_norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        candidates
            .iter()
            .map(|c| {
                let norm = c.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
                if norm == 0.0 || mean_norm == 0.0 {
                    return f64::NEG_INFINITY;
                }
                c.iter().zip(&mean).map(|(&x, m)| x as f64 * m).sum::<f64>() / (norm * mean_norm)
            })
            .collect()
    }

    pub fn choose(context: &[&[f32]], candidates: &[&[f32]]) -> usize {
        let sims = Self::similarities(context, candidates);
        let mut best = 0;
        for (i, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = i;
            }
        }
        best
    }
}

impl CandidateChooser for AverageCosineBaseline {
    /// One-hot on the chosen candidate.
    fn distributions(&self, questions: &[&PredictionQuestion], store: &FeatureStore) -> Result<Vec<Vec<f32>>> {
        questions
            .iter()
            .map(|q| {
                let ctx = q.context.iter().map(|id| store.get(id)).collect::<Result<Vec<_>>>()?;
                let cands = q.candidates.iter().map(|id| store.get(id)).collect::<Result<Vec<_>>>()?;
                let mut dist = vec![0.0; cands.len()];
                dist[Self::choose(&ctx, &cands)] = 1.0;
                Ok(dist)
            })
            .collect()
    }
}

/// Softmax over a row of pre-softmax scores, as a plain vector.
pub fn softmax(scores: &[f32]) -> Vec<f32> {
    let mut v = scores.to_vec();
    softmax_in_place(&mut v);
    v
}
