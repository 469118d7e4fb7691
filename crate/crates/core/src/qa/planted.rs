use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{derive_rng, Rng};

use super::QaExample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedConfig {
    pub clip_dim: usize,
    pub embed_dim: usize,
    pub answers: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            clip_dim: 32,
            embed_dim: 300,
            answers: 5,
            noise_sigma: 0.1,
            seed: 0,
        }
    }
}

/// QA items whose correct answer embedding is `M·clip + ε`. Distractors are
/// the same map applied to unrelated clips, so only the clip identifies the
/// answer; the question embedding is uninformative noise.
#[derive(Clone, Debug)]
pub struct PlantedTask {
    pub config: PlantedConfig,
    /// `M`, `embed_dim × clip_dim`, entries `N(0, 1/clip_dim)`.
    pub map: Vec<Vec<f64>>,
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl PlantedTask {
    pub fn new(config: PlantedConfig) -> Self {
        let mut rng = derive_rng(config.seed, "planted_map", 0);
        let s = 1.0 / (config.clip_dim.max(1) as f64).sqrt();
        let map = (0..config.embed_dim)
            .map(|_| (0..config.clip_dim).map(|_| normal(&mut rng) * s).collect())
            .collect();
        Self { config, map }
    }

    fn answer_for(&self, clip: &[f64], rng: &mut Rng) -> Vec<f32> {
        self.map
            .iter()
            .map(|row| {
                let clean: f64 = row.iter().zip(clip).map(|(m, c)| m * c).sum();
                (clean + self.config.noise_sigma * normal(rng)) as f32
            })
            .collect()
    }

    /// `count` items from the stream named `split`; disjoint names give
    /// independent sets.
    pub fn examples(&self, split: &str, count: usize) -> Vec<QaExample> {
        let c = &self.config;
        (0..count)
            .map(|i| {
                let mut rng = derive_rng(c.seed, &format!("planted/{split}"), i as u64);
                let draw_clip = |rng: &mut Rng| (0..c.clip_dim).map(|_| normal(rng)).collect::<Vec<f64>>();
                let clip = draw_clip(&mut rng);
                let correct = rng.random_range(0..c.answers);
                let answers = (0..c.answers)
                    .map(|k| {
                        let source = if k == correct { clip.clone() } else { draw_clip(&mut rng) };
                        self.answer_for(&source, &mut rng)
                    })
                    .collect();
                let mut question: Vec<f64> = (0..c.embed_dim).map(|_| normal(&mut rng)).collect();
                let norm = question.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                question.iter_mut().for_each(|x| *x /= norm);
                QaExample {
                    qid: format!("{split}_{i:05}"),
                    clip: clip.iter().map(|&x| x as f32).collect(),
                    question: question.into_iter().map(|x| x as f32).collect(),
                    answers,
                    correct_index: correct,
                }
            })
            .collect()
    }
}

/// Shorthand for `PlantedTask::new(config).examples(split, count)`.
pub fn planted_examples(config: &PlantedConfig, split: &str, count: usize) -> Vec<QaExample> {
    PlantedTask::new(config.clone()).examples(split, count)
}
