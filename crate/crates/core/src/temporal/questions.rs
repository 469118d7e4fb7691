use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::FeatureStore;
use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::segmentation::ShotId;

/// Where distractors come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    /// Other shots of the same movie.
    InMovie,
    /// Any shot of any movie in the corpus.
    CrossMovie,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::InMovie => "in_movie",
            Setting::CrossMovie => "cross_movie",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_movie" => Ok(Setting::InMovie),
            "cross_movie" => Ok(Setting::CrossMovie),
            _ => Err(Error::Config(format!("unknown setting `{s}` (in_movie|cross_movie)"))),
        }
    }
}

/// `mctx` consecutive shots and `n` candidates, exactly one of which is the
/// shot that follows the context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredictionQuestion {
    pub qid: String,
    pub movie_id: String,
    pub setting: Setting,
    pub context: Vec<ShotId>,
    pub candidates: Vec<ShotId>,
    pub correct_index: usize,
}

impl PredictionQuestion {
    pub fn answer(&self) -> &ShotId {
        &self.candidates[self.correct_index]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionConfig {
    /// `mctx`.
    pub context_len: usize,
    /// `n`, answer included.
    pub candidates: usize,
    /// Window stride; `0` means `context_len`.
    pub stride: usize,
    /// In-movie distractors must lie more than this many shots from the answer.
    pub exclusion_radius: usize,
    pub seed: u64,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        Self {
            context_len: 8,
            candidates: 32,
            stride: 0,
            exclusion_radius: 0,
            seed: 0,
        }
    }
}

/// Generated questions plus what had to be skipped and why.
#[derive(Clone, Debug, Default)]
pub struct QuestionSet {
    pub questions: Vec<PredictionQuestion>,
    pub skipped_movies: Vec<String>,
    pub skipped_windows: usize,
}

fn window_questions(
    store: &FeatureStore,
    corpus: &[(usize, &str, usize)],
    total_shots: usize,
    movie: usize,
    setting: Setting,
    cfg: &QuestionConfig,
) -> Result<(Vec<PredictionQuestion>, usize)> {
    let (_, movie_id, len) = corpus[movie];
    let stride = if cfg.stride == 0 { cfg.context_len } else { cfg.stride };
    let rows = store.video_rows(movie_id)?;
    let mut out = Vec::new();
    let mut skipped = 0usize;
    let need = cfg.candidates - 1;
    let mut start = 0;
    while start + cfg.context_len < len {
        let answer = start + cfg.context_len;
        let mut rng = derive_rng(cfg.seed, &format!("questions/{setting}/{movie_id}"), start as u64);
        let distractors: Option<Vec<ShotId>> = match setting {
            Setting::InMovie => {
                let pool: Vec<usize> = (0..len)
                    .filter(|&j| !(start..=answer).contains(&j) && j.abs_diff(answer) > cfg.exclusion_radius)
                    .collect();
                (pool.len() >= need).then(|| {
                    index::sample(&mut rng, pool.len(), need)
                        .into_iter()
                        .map(|i| store.id(rows[pool[i]]).clone())
                        .collect()
                })
            }
            Setting::CrossMovie => {
                let excluded = cfg.context_len + 1;
                (total_shots - excluded >= need).then(|| {
                    let mut chosen = HashSet::new();
                    let mut picks = Vec::with_capacity(need);
                    while picks.len() < need {
                        let g = rng.random_range(0..total_shots);
                        let m = corpus.partition_point(|&(offset, _, _)| offset <= g) - 1;
                        let (offset, id, _) = corpus[m];
                        let local = g - offset;
                        if (m == movie && (start..=answer).contains(&local)) || !chosen.insert(g) {
                            continue;
                        }
                        picks.push(store.id(store.video_rows(id).expect("listed movie")[local]).clone());
                    }
                    picks
                })
            }
        };
        match distractors {
            None => skipped += 1,
            Some(d) => {
                let answer_id = store.id(rows[answer]).clone();
                let mut candidates = d;
                candidates.push(answer_id.clone());
                candidates.shuffle(&mut rng);
                let correct_index = candidates.iter().position(|c| *c == answer_id).expect("answer present");
                out.push(PredictionQuestion {
                    qid: format!("{movie_id}:{setting}:{start}"),
                    movie_id: movie_id.to_string(),
                    setting,
                    context: (start..answer).map(|j| store.id(rows[j]).clone()).collect(),
                    candidates,
                    correct_index,
                });
            }
        }
        start += stride;
    }
    Ok((out, skipped))
}

/// Slides a window over each movie's shots; the shot after the window is the
/// answer and `n−1` distractors are drawn uniformly without replacement.
/// Every window draws from its own derived stream, so output depends only on
/// `(store, movies, setting, config)`.
pub fn generate_questions(
    store: &FeatureStore,
    movies: &[String],
    setting: Setting,
    config: &QuestionConfig,
) -> Result<QuestionSet> {
    if config.context_len == 0 || config.candidates == 0 {
        return Err(Error::Config("context_len and candidates must be positive".into()));
    }
    let mut corpus = Vec::with_capacity(movies.len());
    let mut offset = 0;
    for m in movies {
        let len = store.video_rows(m)?.len();
        corpus.push((offset, m.as_str(), len));
        offset += len;
    }
    let per_movie: Vec<(Vec<PredictionQuestion>, usize)> = (0..corpus.len())
        .into_par_iter()
        .map(|i| window_questions(store, &corpus, offset, i, setting, config))
        .collect::<Result<_>>()?;
    let mut set = QuestionSet::default();
    for ((qs, skipped), &(_, id, _)) in per_movie.into_iter().zip(&corpus) {
        if qs.is_empty() {
            set.skipped_movies.push(id.to_string());
        }
        set.skipped_windows += skipped;
        set.questions.extend(qs);
    }
    Ok(set)
}

fn join_ids(ids: &[ShotId]) -> String {
    ids.iter().map(ShotId::to_string).collect::<Vec<_>>().join(",")
}

/// `qid<TAB>movie_id<TAB>setting<TAB>context ids<TAB>candidate ids<TAB>correct_index`,
/// ids comma-separated.
pub fn format_questions(questions: &[PredictionQuestion]) -> String {
    questions
        .iter()
        .map(|q| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                q.qid,
                q.movie_id,
                q.setting,
                join_ids(&q.context),
                join_ids(&q.candidates),
                q.correct_index
            )
        })
        .collect()
}

pub fn parse_questions(text: &str) -> Result<Vec<PredictionQuestion>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let err = |reason: String| Error::Parse { line: n + 1, reason };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 6 {
                return Err(err(format!("expected 6 tab-separated fields, found {}", f.len())));
            }
            let ids = |s: &str| -> Result<Vec<ShotId>> {
                s.split(',').map(|x| x.parse().map_err(|e: Error| err(e.to_string()))).collect()
            };
            let setting = f[2].parse().map_err(|e: Error| err(e.to_string()))?;
            let candidates = ids(f[4])?;
            let correct_index: usize = f[5].parse().map_err(|_| err(format!("bad index `{}`", f[5])))?;
            if correct_index >= candidates.len() {
                return Err(err(format!("correct index {correct_index} of {} candidates", candidates.len())));
            }
            Ok(PredictionQuestion {
                qid: f[0].to_string(),
                movie_id: f[1].to_string(),
                setting,
                context: ids(f[3])?,
                candidates,
                correct_index,
            })
        })
        .collect()
}
