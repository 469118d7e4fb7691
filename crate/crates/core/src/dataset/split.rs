use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_rng;

use super::{ManifestEntry, VideoKind};

/// Movie-level train/val/test partition plus nested trailer training subsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    /// Trailers allowed in training: unlinked, or linked to a training movie.
    pub train_trailers: Vec<String>,
    /// Size → the first `size` of a seeded permutation of `train_trailers`,
    /// so smaller subsets are contained in larger ones.
    pub trailer_subsets: BTreeMap<usize, Vec<String>>,
}

/// Splits movies by seeded shuffle. Train and val sizes are `round(ratio·N)`;
/// test takes the remainder.
pub fn make_splits(
    entries: &[ManifestEntry],
    ratios: [f64; 3],
    seed: u64,
    trailer_subset_sizes: &[usize],
) -> Result<CorpusSplit> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let mut movies: Vec<&str> = entries
        .iter()
        .filter(|e| e.kind == VideoKind::Movie)
        .map(|e| e.id.as_str())
        .collect();
    movies.sort_unstable();
    movies.shuffle(&mut derive_rng(seed, "split", 0));
    let n = movies.len();
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let own = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let train = own(&movies[..n_train]);
    let val = own(&movies[n_train..n_train + n_val]);
    let test = own(&movies[n_train + n_val..]);

    let train_set: HashSet<&str> = train.iter().map(String::as_str).collect();
    let mut train_trailers: Vec<String> = entries
        .iter()
        .filter(|e| e.kind == VideoKind::Trailer)
        .filter(|e| e.linked_movie_id.as_deref().is_none_or(|m| train_set.contains(m)))
        .map(|e| e.id.clone())
        .collect();
    train_trailers.sort_unstable();
    let mut order = train_trailers.clone();
    order.shuffle(&mut derive_rng(seed, "trailer_subsets", 0));
    let mut trailer_subsets = BTreeMap::new();
    for &size in trailer_subset_sizes {
        if size > order.len() {
            return Err(Error::Config(format!(
                "trailer subset of {size} requested but only {} training trailers remain after filtering",
                order.len()
            )));
        }
        trailer_subsets.insert(size, order[..size].to_vec());
    }
    Ok(CorpusSplit {
        train,
        val,
        test,
        train_trailers,
        trailer_subsets,
    })
}

impl CorpusSplit {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("split serializes") + "\n";
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}
