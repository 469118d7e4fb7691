//! A desk-scale movie/trailer world with known ground truth.
//!
//! Topics have unit prototypes and map to tags. A movie walks a Markov chain
//! over a small palette of topics; each shot is its topic's prototype plus a
//! per-movie style offset and AR(1) noise, renormalized. A trailer samples the
//! movie's most distinctive shots and shuffles them.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_rng, Rng};
use crate::segmentation::ShotId;
use crate::tags::{Branch, TagVocabulary};
use crate::encoder::FeatureStore;

use super::{ManifestEntry, VideoKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticWorldConfig {
    pub topics: usize,
    pub dim: usize,
    /// Rejection bound on pairwise prototype cosine.
    pub max_prototype_cosine: f64,
    pub self_transition: f64,
    pub noise_sigma: f64,
    /// AR(1) coefficient of the shot noise along a movie; the marginal stays `N(0, σ²)`.
    pub noise_correlation: f64,
    /// Norm of the per-movie style offset.
    pub style_scale: f64,
    /// Topics a movie draws from; `0` means all of them.
    pub palette_size: usize,
    pub movie_len: (usize, usize),
    pub trailer_len: (usize, usize),
    /// Fraction of a movie's shots, most distinctive first, trailers sample from.
    pub trailer_pool_fraction: f64,
    pub shuffle_trailers: bool,
    /// Minimum share of a movie's shots for a topic's tags to apply.
    pub tag_threshold: f64,
    pub keyword_probability: f64,
    pub movies: usize,
    pub trailers_per_movie: usize,
    /// Trailers cut from extra movies that are not themselves in the corpus.
    pub unlinked_trailers: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        Self {
            topics: 8,
            dim: 32,
            max_prototype_cosine: 0.3,
            self_transition: 0.6,
            noise_sigma: 0.15,
            noise_correlation: 0.5,
            style_scale: 0.25,
            palette_size: 3,
            movie_len: (120, 300),
            trailer_len: (15, 40),
            trailer_pool_fraction: 0.5,
            shuffle_trailers: true,
            tag_threshold: 0.1,
            keyword_probability: 0.5,
            movies: 50,
            trailers_per_movie: 1,
            unlinked_trailers: 0,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self, vocab: &TagVocabulary) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic world: {m}")));
        if self.topics == 0 || self.dim == 0 {
            return bad("topics and dim must be positive");
        }
        if self.topics > vocab.len(Branch::Genre) || self.topics > vocab.len(Branch::Keyword) {
            return bad("more topics than genre or keyword labels");
        }
        if self.topics > 1 && self.topics > self.dim {
            return bad("need dim ≥ topics for near-orthogonal prototypes");
        }
        if !(0.0..=1.0).contains(&self.self_transition) || (self.topics == 1 && self.self_transition < 1.0) {
            return bad("self_transition must lie in [0,1] (and be 1 for a single topic)");
        }
        if !(self.noise_sigma >= 0.0) || !(self.style_scale >= 0.0) {
            return bad("noise_sigma and style_scale must be non-negative");
        }
        if !(-1.0 < self.noise_correlation && self.noise_correlation < 1.0) {
            return bad("noise_correlation must lie in (-1,1)");
        }
        if self.movie_len.0 == 0 || self.movie_len.0 > self.movie_len.1 {
            return bad("movie_len must be a non-empty positive range");
        }
        if self.trailer_len.0 == 0 || self.trailer_len.0 > self.trailer_len.1 {
            return bad("trailer_len must be a non-empty positive range");
        }
        if !(self.trailer_pool_fraction > 0.0 && self.trailer_pool_fraction <= 1.0) {
            return bad("trailer_pool_fraction must lie in (0,1]");
        }
        if !(0.0..=1.0).contains(&self.tag_threshold) || !(0.0..=1.0).contains(&self.keyword_probability) {
            return bad("tag_threshold and keyword_probability must lie in [0,1]");
        }
        Ok(())
    }

    fn palette(&self) -> usize {
        if self.palette_size == 0 {
            self.topics
        } else {
            self.palette_size.min(self.topics)
        }
    }
}

/// Prototypes, topic→tag map and the topic transition matrix.
#[derive(Clone, Debug)]
pub struct World {
    pub config: SyntheticWorldConfig,
    /// `K` unit vectors of length `D`.
    pub prototypes: Vec<Vec<f64>>,
    pub topic_genre: Vec<usize>,
    pub topic_keyword: Vec<Option<usize>>,
    /// Row-stochastic: `self_transition` on the diagonal, the rest spread evenly.
    pub transition: Vec<Vec<f64>>,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn gaussian(rng: &mut Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl World {
    pub fn new(config: SyntheticWorldConfig, vocab: &TagVocabulary) -> Result<Self> {
        config.validate(vocab)?;
        let (k, d) = (config.topics, config.dim);
        let mut rng = derive_rng(config.seed, "world", 0);
        let mut prototypes: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut attempts = 0usize;
        while prototypes.len() < k {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::Config(format!(
                    "could not place {k} prototypes in {d} dimensions with cosine < {}",
                    config.max_prototype_cosine
                )));
            }
            let mut p = gaussian(&mut rng, d, 1.0);
            normalize(&mut p);
            if prototypes.iter().all(|q| cosine(q, &p) < config.max_prototype_cosine) {
                prototypes.push(p);
            }
        }
        let topic_genre = index::sample(&mut rng, vocab.len(Branch::Genre), k).into_vec();
        let keyword_pool = index::sample(&mut rng, vocab.len(Branch::Keyword), k).into_vec();
        let topic_keyword = keyword_pool
            .into_iter()
            .map(|kw| rng.random_bool(config.keyword_probability).then_some(kw))
            .collect();
        let off = if k > 1 {
            (1.0 - config.self_transition) / (k - 1) as f64
        } else {
            0.0
        };
        let transition = (0..k)
            .map(|i| (0..k).map(|j| if i == j { config.self_transition } else { off }).collect())
            .collect();
        Ok(Self {
            config,
            prototypes,
            topic_genre,
            topic_keyword,
            transition,
        })
    }

    /// Movie-level chain over `palette`: keeps each topic's self-transition
    /// and renormalizes its off-diagonal mass over the other palette topics.
    pub fn palette_transition(&self, palette: &[usize]) -> Vec<Vec<f64>> {
        palette
            .iter()
            .map(|&i| {
                let stay = self.transition[i][i];
                let others: f64 = palette.iter().filter(|&&j| j != i).map(|&j| self.transition[i][j]).sum();
                palette
                    .iter()
                    .map(|&j| {
                        if j == i {
                            if others > 0.0 {
                                stay
                            } else {
                                1.0
                            }
                        } else if others > 0.0 {
                            (1.0 - stay) * self.transition[i][j] / others
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Genre and keyword indices implied by a topic.
    pub fn topic_tags(&self, topic: usize) -> (usize, Option<usize>) {
        (self.topic_genre[topic], self.topic_keyword[topic])
    }

    /// Tags of topics holding at least `tag_threshold` of the shots; if none
    /// does, the most frequent topic's tags, so every movie has a genre.
    pub fn tags_for(&self, topics: &[usize]) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let mut counts = vec![0usize; self.config.topics];
        topics.iter().for_each(|&t| counts[t] += 1);
        let n = topics.len().max(1) as f64;
        let mut present: Vec<usize> = (0..counts.len())
            .filter(|&t| counts[t] > 0 && counts[t] as f64 / n >= self.config.tag_threshold)
            .collect();
        if present.is_empty() {
            let best = (0..counts.len()).max_by_key(|&t| (counts[t], std::cmp::Reverse(t)));
            present.extend(best);
        }
        let mut genres = BTreeSet::new();
        let mut keywords = BTreeSet::new();
        for t in present {
            let (g, k) = self.topic_tags(t);
            genres.insert(g);
            keywords.extend(k);
        }
        (genres, keywords)
    }

    pub fn synthesize_movie(&self, id: &str, rng: &mut Rng) -> Result<SyntheticVideo> {
        let cfg = &self.config;
        let palette = {
            let mut p = index::sample(rng, cfg.topics, cfg.palette()).into_vec();
            p.sort_unstable();
            p
        };
        let chain = self.palette_transition(&palette);
        let rows: Vec<WeightedIndex<f64>> = chain
            .iter()
            .map(|r| WeightedIndex::new(r).map_err(|e| Error::Config(format!("transition row: {e}"))))
            .collect::<Result<_>>()?;
        let len = rng.random_range(cfg.movie_len.0..=cfg.movie_len.1);
        let mut style = gaussian(rng, cfg.dim, 1.0);
        normalize(&mut style);
        style.iter_mut().for_each(|x| *x *= cfg.style_scale);
        let rho = cfg.noise_correlation;
        let innovation = (1.0 - rho * rho).sqrt();
        let mut state = rng.random_range(0..palette.len());
        let mut noise = gaussian(rng, cfg.dim, cfg.noise_sigma);
        let mut topics = Vec::with_capacity(len);
        let mut features = Vec::with_capacity(len);
        for t in 0..len {
            if t > 0 {
                state = rows[state].sample(rng);
                let fresh = gaussian(rng, cfg.dim, cfg.noise_sigma);
                noise.iter_mut().zip(fresh).for_each(|(e, z)| *e = rho * *e + innovation * z);
            }
            let topic = palette[state];
            let mut f: Vec<f64> = self.prototypes[topic]
                .iter()
                .zip(&style)
                .zip(&noise)
                .map(|((p, s), e)| p + s + e)
                .collect();
            normalize(&mut f);
            topics.push(topic);
            features.push(f.into_iter().map(|x| x as f32).collect());
        }
        let (genres, keywords) = self.tags_for(&topics);
        Ok(SyntheticVideo {
            id: id.to_string(),
            kind: VideoKind::Movie,
            features,
            topics,
            source_shots: None,
            genres,
            keywords,
            linked_movie_id: None,
        })
    }

    /// Samples a trailer from the top `trailer_pool_fraction` of the movie's
    /// shots ranked by distance from the movie's mean feature.
    pub fn synthesize_trailer(&self, id: &str, movie: &SyntheticVideo, rng: &mut Rng) -> Result<SyntheticVideo> {
        let cfg = &self.config;
        let len = rng.random_range(cfg.trailer_len.0..=cfg.trailer_len.1);
        if movie.features.len() <= len {
            return Err(Error::Range(format!(
                "movie `{}` has {} shots, too few for a {len}-shot trailer",
                movie.id,
                movie.features.len()
            )));
        }
        let ranked = distinctiveness_ranking(&movie.features);
        let pool = ((ranked.len() as f64 * cfg.trailer_pool_fraction).ceil() as usize).max(len);
        let mut picks: Vec<usize> = index::sample(rng, pool, len)
            .into_iter()
            .map(|i| ranked[i])
            .collect();
        if cfg.shuffle_trailers {
            picks.shuffle(rng);
        } else {
            picks.sort_unstable();
        }
        Ok(SyntheticVideo {
            id: id.to_string(),
            kind: VideoKind::Trailer,
            features: picks.iter().map(|&i| movie.features[i].clone()).collect(),
            topics: picks.iter().map(|&i| movie.topics[i]).collect(),
            source_shots: Some(picks),
            genres: movie.genres.clone(),
            keywords: movie.keywords.clone(),
            linked_movie_id: Some(movie.id.clone()),
        })
    }
}

/// Shot indices sorted by decreasing distance from the mean feature; ties
/// keep temporal order.
pub fn distinctiveness_ranking(features: &[Vec<f32>]) -> Vec<usize> {
    let dim = features.first().map_or(0, Vec::len);
    let n = features.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for f in features {
        mean.iter_mut().zip(f).for_each(|(m, &x)| *m += x as f64 / n);
    }
    let dist: Vec<f64> = features
        .iter()
        .map(|f| f.iter().zip(&mean).map(|(&x, m)| (x as f64 - m).powi(2)).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    order
}

/// A generated movie or trailer with its hidden topic labels.
#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    pub id: String,
    pub kind: VideoKind,
    pub features: Vec<Vec<f32>>,
    pub topics: Vec<usize>,
    /// For trailers: the movie shot each trailer shot was taken from.
    pub source_shots: Option<Vec<usize>>,
    pub genres: BTreeSet<usize>,
    pub keywords: BTreeSet<usize>,
    pub linked_movie_id: Option<String>,
}

/// Per-video ground truth; written next to the corpus for tests and never
/// read by models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub id: String,
    pub topics: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_shots: Option<Vec<usize>>,
}

/// Movies (`movie_0000`, …), their trailers (`trailer_0000`, …) and any
/// unlinked trailers (`extra_0000`, …, cut from movies outside the corpus).
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub world: World,
    pub movies: Vec<SyntheticVideo>,
    pub trailers: Vec<SyntheticVideo>,
}

impl SyntheticCorpus {
    /// Every video draws from its own stream derived from `(seed, role, ordinal)`,
    /// so generation order and parallelism do not affect the result.
    pub fn generate(config: SyntheticWorldConfig, vocab: &TagVocabulary) -> Result<Self> {
        let world = World::new(config, vocab)?;
        let cfg = world.config.clone();
        let movies: Vec<SyntheticVideo> = (0..cfg.movies)
            .into_par_iter()
            .map(|i| {
                let mut rng = derive_rng(cfg.seed, "movie", i as u64);
                world.synthesize_movie(&format!("movie_{i:04}"), &mut rng)
            })
            .collect::<Result<_>>()?;
        let linked = cfg.movies * cfg.trailers_per_movie;
        let mut trailers: Vec<SyntheticVideo> = (0..linked)
            .into_par_iter()
            .map(|j| {
                let mut rng = derive_rng(cfg.seed, "trailer", j as u64);
                let movie = &movies[j / cfg.trailers_per_movie.max(1)];
                world.synthesize_trailer(&format!("trailer_{j:04}"), movie, &mut rng)
            })
            .collect::<Result<_>>()?;
        let extra: Vec<SyntheticVideo> = (0..cfg.unlinked_trailers)
            .into_par_iter()
            .map(|j| {
                let mut rng = derive_rng(cfg.seed, "unlinked", j as u64);
                let source = world.synthesize_movie(&format!("offscreen_{j:04}"), &mut rng)?;
                let mut t = world.synthesize_trailer(&format!("extra_{j:04}"), &source, &mut rng)?;
                t.linked_movie_id = None;
                Ok(t)
            })
            .collect::<Result<_>>()?;
        trailers.extend(extra);
        Ok(Self {
            world,
            movies,
            trailers,
        })
    }

    pub fn videos(&self) -> impl Iterator<Item = &SyntheticVideo> {
        self.movies.iter().chain(&self.trailers)
    }

    pub fn video(&self, id: &str) -> Option<&SyntheticVideo> {
        self.videos().find(|v| v.id == id)
    }

    /// All shots of all videos, movies first, in shot order.
    pub fn feature_store(&self) -> Result<FeatureStore> {
        let mut store = FeatureStore::new(self.world.config.dim);
        for v in self.videos() {
            for (i, f) in v.features.iter().enumerate() {
                store.insert(ShotId::new(v.id.clone(), i as u32), f)?;
            }
        }
        Ok(store)
    }

    /// Manifest entries pointing at `cache_path`.
    pub fn manifest(&self, vocab: &TagVocabulary, cache_path: &str) -> Result<Vec<ManifestEntry>> {
        self.videos()
            .map(|v| {
                let names = |branch, set: &BTreeSet<usize>| -> Result<Vec<String>> {
                    set.iter().map(|&i| vocab.name(branch, i).map(str::to_string)).collect()
                };
                Ok(ManifestEntry {
                    id: v.id.clone(),
                    kind: v.kind,
                    path: cache_path.to_string(),
                    genres: names(Branch::Genre, &v.genres)?,
                    keywords: names(Branch::Keyword, &v.keywords)?,
                    linked_movie_id: v.linked_movie_id.clone(),
                })
            })
            .collect()
    }

    pub fn ground_truth(&self) -> Vec<GroundTruthRecord> {
        self.videos()
            .map(|v| GroundTruthRecord {
                id: v.id.clone(),
                topics: v.topics.clone(),
                source_shots: v.source_shots.clone(),
            })
            .collect()
    }
}

pub fn format_ground_truth(records: &[GroundTruthRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("ground truth serializes") + "\n")
        .collect()
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: n + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
