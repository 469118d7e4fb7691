//! Python bindings: feature caches, tag models, shot detection, metrics and
//! the command-line entry point.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use storyline::cli::{card_path, ModelCard};
use storyline::encoder::FeatureStore;
use storyline::segmentation::{self, FrameSequence, SegmenterParams, ShotId};
use storyline::tags::{self, TagVocabulary};

fn to_py(e: storyline::Error) -> PyErr {
    match e {
        storyline::Error::Io { .. } | storyline::Error::RawIo(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(format!("{}: {e}", e.kind())),
    }
}

/// Shot feature cache (SHTF file).
#[pyclass(name = "FeatureStore", module = "storyline_py", frozen)]
struct PyFeatureStore {
    inner: FeatureStore,
}

#[pymethods]
impl PyFeatureStore {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: FeatureStore::load(&path).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn videos(&self) -> Vec<String> {
        self.inner.videos().to_vec()
    }

    fn shot_count(&self, video: &str) -> PyResult<usize> {
        Ok(self.inner.video_rows(video).map_err(to_py)?.len())
    }

    fn get(&self, video: &str, ordinal: u32) -> PyResult<Vec<f32>> {
        let id = ShotId::new(video.to_string(), ordinal);
        Ok(self.inner.get(&id).map_err(to_py)?.to_vec())
    }
}

/// Genre/keyword model written by `storyline train-tags`.
#[pyclass(name = "TagModel", module = "storyline_py", frozen)]
struct PyTagModel {
    inner: tags::TagModel,
    vocab: TagVocabulary,
}

#[pymethods]
impl PyTagModel {
    /// Reads the checkpoint and its `<path>.json` card.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let params = storyline::autodiff::load_checkpoint(&path).map_err(to_py)?;
        let card = std::fs::read_to_string(card_path(&path))?;
        let card: ModelCard = serde_json::from_str(&card).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let ModelCard::Tags { scoring } = card else {
            return Err(PyValueError::new_err(format!("{} is not a tag model", path.display())));
        };
        let inner = tags::TagModel::from_params(params, scoring).map_err(to_py)?;
        Ok(Self { inner, vocab: TagVocabulary::default() })
    }

    fn genre_names(&self) -> Vec<String> {
        names(&self.vocab, tags::Branch::Genre)
    }

    fn keyword_names(&self) -> Vec<String> {
        names(&self.vocab, tags::Branch::Keyword)
    }

    /// `(genre_scores, keyword_scores)` from the mean of per-shot scores.
    fn score_average(&self, store: &PyFeatureStore, video: &str) -> PyResult<(Vec<f32>, Vec<f32>)> {
        let p = self.inner.infer_score_average(&store.inner, video).map_err(to_py)?;
        Ok((p.genres, p.keywords))
    }

    /// `[(ordinal, score)]` for one tag over every shot of `video`.
    fn shot_response(&self, store: &PyFeatureStore, video: &str, tag: &str) -> PyResult<Vec<(u32, f32)>> {
        let series = tags::shot_tag_response(&self.inner, &self.vocab, &store.inner, video, tag).map_err(to_py)?;
        Ok(series.into_iter().map(|(id, s)| (id.ordinal, s)).collect())
    }
}

fn names(vocab: &TagVocabulary, branch: tags::Branch) -> Vec<String> {
    (0..vocab.len(branch)).map(|i| vocab.name(branch, i).unwrap_or_default().to_string()).collect()
}

/// Shot boundaries of packed RGB frames, as `[(start, end)]` half-open ranges.
#[pyfunction]
fn detect_shots(width: usize, height: usize, frames: &[u8]) -> PyResult<Vec<(usize, usize)>> {
    let seq = FrameSequence::new(width, height, frames.to_vec()).map_err(to_py)?;
    let shots = segmentation::detect_shots("video", &seq, &SegmenterParams::default()).map_err(to_py)?;
    Ok(shots.iter().map(|s| (s.start, s.end)).collect())
}

#[pyfunction]
fn recall_at_k(scores: Vec<Vec<f32>>, truths: Vec<Vec<usize>>, k: usize) -> PyResult<f64> {
    tags::recall_at_k(&scores, &truths, k).map_err(to_py)
}

#[pyfunction]
fn mean_average_precision(scores: Vec<Vec<f32>>, truths: Vec<Vec<usize>>) -> PyResult<f64> {
    tags::mean_average_precision(&scores, &truths).map_err(to_py)
}

/// Runs the `storyline` command line with `args` (without the program name);
/// returns its exit code.
#[pyfunction]
fn run(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("storyline".to_string()).chain(args).collect();
    py.detach(|| storyline::cli::run(argv))
}

#[pymodule]
fn storyline_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFeatureStore>()?;
    m.add_class::<PyTagModel>()?;
    m.add_function(wrap_pyfunction!(detect_shots, m)?)?;
    m.add_function(wrap_pyfunction!(recall_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(mean_average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_keep_their_kind() {
        Python::initialize();
        let e = to_py(storyline::Error::Config("bad key".into()));
        Python::attach(|py| {
            assert!(e.is_instance_of::<PyValueError>(py));
            assert!(e.value(py).to_string().starts_with("config: "));
        });
    }
}
