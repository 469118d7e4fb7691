use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid_scalar, softmax_in_place, Bound, ParamSet, Scalar, Tape, Tensor, Var};
use crate::encoder::{Mode, ShotSource};
use crate::error::{Error, Result};
use crate::nn::{Linear, Lstm};

use super::{Branch, TagVocabulary};

/// How logits become scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    /// Independent per-label sigmoid, trained with binary cross-entropy.
    #[default]
    Sigmoid,
    /// One softmax per branch, trained with cross-entropy on each positive.
    Softmax,
}

impl FromStr for Scoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Scoring::Sigmoid),
            "softmax" => Ok(Scoring::Softmax),
            _ => Err(Error::Config(format!("unknown scoring mode `{s}` (sigmoid|softmax)"))),
        }
    }
}

/// Ground-truth label indices of one video. `keywords` may be empty.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelSet {
    pub genres: Vec<usize>,
    pub keywords: Vec<usize>,
}

/// Per-label scores of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct TagPrediction {
    pub video_id: String,
    pub genres: Vec<f32>,
    pub keywords: Vec<f32>,
}

impl TagPrediction {
    pub fn branch(&self, branch: Branch) -> &[f32] {
        match branch {
            Branch::Genre => &self.genres,
            Branch::Keyword => &self.keywords,
        }
    }
}

pub(crate) const PROJECTION: &str = "proj";
pub(crate) const GENRE_HEAD: &str = "genre";
pub(crate) const KEYWORD_HEAD: &str = "keyword";
pub(crate) const SEQ_LSTM: &str = "seq.lstm";
pub(crate) const SEQ_GENRE: &str = "seq.genre";
pub(crate) const SEQ_KEYWORD: &str = "seq.keyword";

/// Recurrent head for Feature+LSTM inference: an LSTM over projected shot
/// features whose every hidden state feeds its own genre/keyword heads.
#[derive(Clone, Debug)]
pub struct SequenceHead {
    pub lstm: Lstm,
    pub genre: Linear,
    pub keyword: Linear,
}

/// Parameter layout: optional linear projection `D→D′`, then affine genre and
/// keyword heads on the projected feature.
#[derive(Clone, Debug)]
pub struct TagLayout {
    pub projection: Option<Linear>,
    pub genre: Linear,
    pub keyword: Linear,
    pub sequence: Option<SequenceHead>,
}

impl TagLayout {
    /// `proj_dim == 0` skips the projection.
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        input: usize,
        proj_dim: usize,
        vocab: &TagVocabulary,
        rng: &mut R,
    ) -> Result<Self> {
        let projection = (proj_dim > 0)
            .then(|| Linear::new(params, PROJECTION, input, proj_dim, true, rng))
            .transpose()?;
        let width = if proj_dim > 0 { proj_dim } else { input };
        let genre = Linear::new(params, GENRE_HEAD, width, vocab.len(Branch::Genre), true, rng)?;
        let keyword = Linear::new(params, KEYWORD_HEAD, width, vocab.len(Branch::Keyword), true, rng)?;
        Ok(Self {
            projection,
            genre,
            keyword,
            sequence: None,
        })
    }

    pub fn from_params<T: Scalar>(params: &ParamSet<T>) -> Result<Self> {
        let projection = params
            .id(&format!("{PROJECTION}.w"))
            .ok()
            .map(|_| Linear::from_params(params, PROJECTION))
            .transpose()?;
        let genre = Linear::from_params(params, GENRE_HEAD)?;
        let keyword = Linear::from_params(params, KEYWORD_HEAD)?;
        let sequence = params
            .id(&format!("{SEQ_LSTM}.i.w"))
            .ok()
            .map(|_| -> Result<SequenceHead> {
                Ok(SequenceHead {
                    lstm: Lstm::from_params(params, SEQ_LSTM)?,
                    genre: Linear::from_params(params, SEQ_GENRE)?,
                    keyword: Linear::from_params(params, SEQ_KEYWORD)?,
                })
            })
            .transpose()?;
        let layout = Self {
            projection,
            genre,
            keyword,
            sequence,
        };
        if let Some(p) = &layout.projection {
            if p.output != layout.genre.input {
                return Err(Error::shape("tag head", &[p.output], &[layout.genre.input]));
            }
        }
        Ok(layout)
    }

    /// Adds the sequence head (hidden width `hidden`) to an existing layout.
    pub fn add_sequence<T: Scalar, R: Rng + ?Sized>(
        &mut self,
        params: &mut ParamSet<T>,
        hidden: usize,
        rng: &mut R,
    ) -> Result<()> {
        let lstm = Lstm::new(params, SEQ_LSTM, self.feature_dim(), hidden, rng)?;
        let genre = Linear::new(params, SEQ_GENRE, hidden, self.genre.output, true, rng)?;
        let keyword = Linear::new(params, SEQ_KEYWORD, hidden, self.keyword.output, true, rng)?;
        self.sequence = Some(SequenceHead { lstm, genre, keyword });
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.projection.as_ref().map_or(self.genre.input, |p| p.input)
    }

    /// Width of the projected feature the heads consume.
    pub fn feature_dim(&self) -> usize {
        self.genre.input
    }

    pub fn project<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let (r, c) = tape.value(x).dims2("tag model")?;
        if c != self.input_dim() {
            return Err(Error::shape("tag model", &[r, c], &[r, self.input_dim()]));
        }
        match &self.projection {
            Some(p) => p.forward(tape, bound, x),
            None => Ok(x),
        }
    }

    /// Genre and keyword logits for a `B×D` batch of pooled features.
    pub fn logits<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<(Var, Var)> {
        let z = self.project(tape, bound, x)?;
        Ok((self.genre.forward(tape, bound, z)?, self.keyword.forward(tape, bound, z)?))
    }

    /// Per-step logits of the sequence head over `steps` (each `B×D`).
    pub fn sequence_logits<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        steps: &[Var],
    ) -> Result<Vec<(Var, Var)>> {
        let seq = self
            .sequence
            .as_ref()
            .ok_or_else(|| Error::Config("model has no Feature+LSTM head".into()))?;
        let projected = steps
            .iter()
            .map(|&x| self.project(tape, bound, x))
            .collect::<Result<Vec<_>>>()?;
        let hidden = seq.lstm.run(tape, bound, &projected)?;
        hidden
            .into_iter()
            .map(|h| Ok((seq.genre.forward(tape, bound, h)?, seq.keyword.forward(tape, bound, h)?)))
            .collect()
    }
}

fn check_labels(truths: &[LabelSet], genres: usize, keywords: usize) -> Result<()> {
    for (v, t) in truths.iter().enumerate() {
        for (&i, n, b) in t
            .genres
            .iter()
            .map(|i| (i, genres, Branch::Genre))
            .chain(t.keywords.iter().map(|i| (i, keywords, Branch::Keyword)))
        {
            if i >= n {
                return Err(Error::Index(format!("{b} label {i} of {n} for video {v}")));
            }
        }
    }
    Ok(())
}

fn multi_hot<T: Scalar>(sets: &[&Vec<usize>], width: usize) -> Tensor<T> {
    let mut t = Tensor::zeros(&[sets.len(), width]);
    for (r, set) in sets.iter().enumerate() {
        for &i in set.iter() {
            t.data_mut()[r * width + i] = T::one();
        }
    }
    t
}

/// Loss of one branch over the rows listed in `rows`.
fn branch_loss<T: Scalar>(
    tape: &mut Tape<T>,
    logits: Var,
    rows: &[usize],
    sets: &[&Vec<usize>],
    scoring: Scoring,
) -> Result<Var> {
    let width = tape.value(logits).dims2("multitask_loss")?.1;
    let picked = tape.gather_rows(logits, rows)?;
    match scoring {
        Scoring::Sigmoid => tape.bce_with_logits(picked, &multi_hot(sets, width)),
        Scoring::Softmax => {
            let mut expanded = Vec::new();
            let mut targets = Vec::new();
            for (r, set) in sets.iter().enumerate() {
                for &i in set.iter() {
                    expanded.push(r);
                    targets.push(i);
                }
            }
            let probs = tape.softmax_rows(picked)?;
            let probs = tape.gather_rows(probs, &expanded)?;
            tape.nll_loss(probs, &targets)
        }
    }
}

/// `λ·L_genre + (1−λ)·L_keyword`, each a mean over its labels. Videos without
/// keywords drop out of the keyword term, which is then weighted by the share
/// of videos that have them so every video counts equally.
pub fn multitask_loss<T: Scalar>(
    tape: &mut Tape<T>,
    genre_logits: Var,
    keyword_logits: Var,
    truths: &[LabelSet],
    lambda: f64,
    scoring: Scoring,
) -> Result<Var> {
    let (rows, genres) = tape.value(genre_logits).dims2("multitask_loss")?;
    let (krows, keywords) = tape.value(keyword_logits).dims2("multitask_loss")?;
    if rows != truths.len() || krows != rows {
        return Err(Error::shape("multitask_loss", &[rows, krows], &[truths.len()]));
    }
    check_labels(truths, genres, keywords)?;
    let all: Vec<usize> = (0..rows).collect();
    let genre_sets: Vec<&Vec<usize>> = truths.iter().map(|t| &t.genres).collect();
    let genre = branch_loss(tape, genre_logits, &all, &genre_sets, scoring)?;
    let genre = tape.scale(genre, T::from_f64(lambda));
    let with_kw: Vec<usize> = (0..rows).filter(|&r| !truths[r].keywords.is_empty()).collect();
    if with_kw.is_empty() || lambda >= 1.0 {
        return Ok(genre);
    }
    let kw_sets: Vec<&Vec<usize>> = with_kw.iter().map(|&r| &truths[r].keywords).collect();
    let keyword = branch_loss(tape, keyword_logits, &with_kw, &kw_sets, scoring)?;
    let weight = (1.0 - lambda) * with_kw.len() as f64 / rows as f64;
    let keyword = tape.scale(keyword, T::from_f64(weight));
    tape.add(genre, keyword)
}

/// Scores from one row of logits.
pub fn scores_from_logits(logits: &[f32], scoring: Scoring) -> Vec<f32> {
    match scoring {
        Scoring::Sigmoid => logits.iter().map(|&z| sigmoid_scalar(z)).collect(),
        Scoring::Softmax => {
            let mut row = logits.to_vec();
            softmax_in_place(&mut row);
            row
        }
    }
}

/// A trained tag model: parameters, their layout and the scoring link.
#[derive(Clone, Debug)]
pub struct TagModel {
    pub params: ParamSet<f32>,
    pub layout: TagLayout,
    pub scoring: Scoring,
}

fn matrix(rows: &[Vec<f32>], dim: usize) -> Result<Tensor<f32>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput("no feature rows".into()));
    }
    let mut data = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(Error::shape("tag model", &[r.len()], &[dim]));
        }
        data.extend_from_slice(r);
    }
    Tensor::matrix(rows.len(), dim, data)
}

fn mean_scores(rows: &[(Vec<f32>, Vec<f32>)]) -> (Vec<f32>, Vec<f32>) {
    let n = rows.len() as f64;
    let avg = |pick: &dyn Fn(&(Vec<f32>, Vec<f32>)) -> &Vec<f32>| -> Vec<f32> {
        let mut acc = vec![0.0f64; pick(&rows[0]).len()];
        for r in rows {
            acc.iter_mut().zip(pick(r)).for_each(|(a, &v)| *a += v as f64);
        }
        acc.into_iter().map(|a| (a / n) as f32).collect()
    };
    (avg(&|r| &r.0), avg(&|r| &r.1))
}

impl TagModel {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        proj_dim: usize,
        vocab: &TagVocabulary,
        scoring: Scoring,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        let layout = TagLayout::new(&mut params, input, proj_dim, vocab, rng)?;
        Ok(Self {
            params,
            layout,
            scoring,
        })
    }

    pub fn from_params(params: ParamSet<f32>, scoring: Scoring) -> Result<Self> {
        let layout = TagLayout::from_params(&params)?;
        Ok(Self {
            params,
            layout,
            scoring,
        })
    }

    /// Scores for each row of pooled features.
    pub fn predict_rows(&self, rows: &[Vec<f32>]) -> Result<Vec<(Vec<f32>, Vec<f32>)>> {
        let x = matrix(rows, self.layout.input_dim())?;
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let xv = tape.constant(x);
        let (g, k) = self.layout.logits(&mut tape, &bound, xv)?;
        let (gv, kv) = (tape.value(g), tape.value(k));
        Ok((0..rows.len())
            .map(|i| (scores_from_logits(gv.row(i), self.scoring), scores_from_logits(kv.row(i), self.scoring)))
            .collect())
    }

    /// Scores for a pooled video feature.
    pub fn forward_video(&self, video_id: &str, feature: &[f32]) -> Result<TagPrediction> {
        let (genres, keywords) = self.predict_rows(&[feature.to_vec()])?.remove(0);
        Ok(TagPrediction {
            video_id: video_id.to_string(),
            genres,
            keywords,
        })
    }

    /// Mean of per-shot scores over every shot of the video.
    pub fn infer_score_average(&self, source: &dyn ShotSource, video: &str) -> Result<TagPrediction> {
        let shots = source.all_shots(video)?;
        let (genres, keywords) = mean_scores(&self.predict_rows(&shots)?);
        Ok(TagPrediction {
            video_id: video.to_string(),
            genres,
            keywords,
        })
    }

    /// Per-step scores of the sequence head over a feature sequence.
    pub fn sequence_scores(&self, steps: &[Vec<f32>]) -> Result<Vec<(Vec<f32>, Vec<f32>)>> {
        if steps.is_empty() {
            return Err(Error::EmptyInput("Feature+LSTM over an empty sequence".into()));
        }
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let vars = steps
            .iter()
            .map(|s| Ok(tape.constant(matrix(std::slice::from_ref(s), self.layout.input_dim())?)))
            .collect::<Result<Vec<_>>>()?;
        let logits = self.layout.sequence_logits(&mut tape, &bound, &vars)?;
        Ok(logits
            .into_iter()
            .map(|(g, k)| {
                (
                    scores_from_logits(tape.value(g).data(), self.scoring),
                    scores_from_logits(tape.value(k).data(), self.scoring),
                )
            })
            .collect())
    }

    /// Mean over time of the sequence head's per-step scores, run over every
    /// shot in order.
    pub fn infer_feature_lstm(&self, source: &dyn ShotSource, video: &str) -> Result<TagPrediction> {
        if self.layout.sequence.is_none() {
            return Err(Error::Config("model has no Feature+LSTM head".into()));
        }
        let shots = source.all_shots(video)?;
        let (genres, keywords) = mean_scores(&self.sequence_scores(&shots)?);
        Ok(TagPrediction {
            video_id: video.to_string(),
            genres,
            keywords,
        })
    }

    /// Eval-mode pooled feature of `n` evenly spaced shots, scored.
    pub fn infer_pooled(&self, source: &dyn ShotSource, video: &str, n: usize) -> Result<TagPrediction> {
        let f = source.video_feature(video, n, &mut Mode::Eval)?;
        self.forward_video(video, &f)
    }
}
