use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::autodiff::{load_checkpoint, save_checkpoint, ParamSet};
use crate::dataset::{
    format_ground_truth, load_manifest, make_splits, save_manifest, CorpusSplit, ManifestEntry, SyntheticCorpus,
    SyntheticWorldConfig,
};
use crate::encoder::{extract_store, FeatureStore, HistogramEdgeExtractor};
use crate::error::{Error, Result};
use crate::qa::{
    evaluate_qa, parse_items, prepare_items, train_qa, EmbeddingProvider, HashingEmbedding, LookupEmbedding,
    QaModel, QaTrainConfig, EMBED_DIM,
};
use crate::report::format_metrics;
use crate::rng::derive_rng;
use crate::segmentation::{detect_shots, format_shot_list, parse_shot_list, FrameSequence, SegmenterParams};
use crate::tags::{
    chance_recall_at_k, format_predictions, mean_average_precision, recall_at_k, shot_tag_response, top_shots,
    train_tags, Branch, LabelSet, LabeledVideo, Scoring, TagModel, TagPrediction, TagTrainConfig, TagVocabulary,
};
use crate::temporal::{
    evaluate_accuracy, format_questions, generate_questions, parse_questions, train_next_shot, AccuracyReport,
    AverageCosineBaseline, ContextReadout, NextShotModel, PredictionQuestion, QuestionConfig, Setting,
    TemporalTrainConfig,
};

use super::config::{resolve, resolve_pair, Overrides};
use super::runlog::Io;

/// What a command hands back for the run manifest.
pub struct Outcome {
    pub config: Value,
    pub seed: u64,
}

fn read(io: &mut Io, path: &Path) -> Result<String> {
    io.input(path);
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(io: &mut Io, path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    io.output(path);
    Ok(())
}

fn to_value<C: Serialize>(c: &C) -> Value {
    serde_json::to_value(c).expect("config serializes")
}

fn load_features(io: &mut Io, paths: &[PathBuf]) -> Result<FeatureStore> {
    let (first, rest) = paths
        .split_first()
        .ok_or_else(|| Error::Config("at least one --features cache is required".into()))?;
    io.input(first);
    let mut store = FeatureStore::load(first)?;
    for p in rest {
        io.input(p);
        store.extend(&FeatureStore::load(p)?)?;
    }
    Ok(store)
}

/// Non-parameter settings saved next to a checkpoint as `<checkpoint>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelCard {
    Tags { scoring: Scoring },
    Temporal { readout: ContextReadout },
    Qa { embed_dim: usize, provider: String },
}

pub fn card_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn save_model(io: &mut Io, params: &ParamSet<f32>, card: &ModelCard, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_checkpoint(params, path)?;
    io.output(path);
    let text = serde_json::to_string_pretty(card).expect("card serializes") + "\n";
    write(io, &card_path(path), &text)
}

fn load_model(io: &mut Io, path: &Path) -> Result<(ParamSet<f32>, ModelCard)> {
    io.input(path);
    let params = load_checkpoint(path)?;
    let text = read(io, &card_path(path))?;
    let card = serde_json::from_str(&text).map_err(|e| Error::Format(format!("model card: {e}")))?;
    Ok((params, card))
}

fn wrong_model(path: &Path, want: &str) -> Error {
    Error::Config(format!("{} is not a {want} model", path.display()))
}

// ---------------------------------------------------------------- segment

pub fn segment(io: &mut Io, o: &Overrides, seed: Option<u64>, input: &Path, video: Option<&str>, output: &Path) -> Result<Outcome> {
    let params: SegmenterParams = resolve(&SegmenterParams::default(), o, None)?;
    params.validate()?;
    io.input(input);
    let seq = FrameSequence::load(input)?;
    let video = match video {
        Some(v) => v.to_string(),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config("cannot derive a video id; pass --video".into()))?,
    };
    let shots = detect_shots(&video, &seq, &params)?;
    write(io, output, &format_shot_list(&shots))?;
    println!("{}\tshots\t{}", video, shots.len());
    Ok(Outcome {
        config: to_value(&params),
        seed: seed.unwrap_or(0),
    })
}

// ---------------------------------------------------------------- extract

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// `m`, frames sampled per shot.
    pub frames_per_shot: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { frames_per_shot: 3 }
    }
}

pub fn extract(io: &mut Io, o: &Overrides, seed: Option<u64>, input: &Path, shots: &Path, output: &Path) -> Result<Outcome> {
    let cfg: ExtractConfig = resolve(&ExtractConfig::default(), o, None)?;
    if cfg.frames_per_shot == 0 {
        return Err(Error::Config("frames_per_shot must be positive".into()));
    }
    io.input(input);
    let seq = FrameSequence::load(input)?;
    let shot_list = parse_shot_list(&read(io, shots)?)?;
    let store = extract_store(&shot_list, &seq, &HistogramEdgeExtractor::default(), cfg.frames_per_shot)?;
    store.save(output)?;
    io.output(output);
    println!("shots\t{}\tdim\t{}", store.len(), store.dim());
    Ok(Outcome {
        config: to_value(&cfg),
        seed: seed.unwrap_or(0),
    })
}

// ---------------------------------------------------------------- synth

pub fn synth(io: &mut Io, o: &Overrides, seed: Option<u64>, out_dir: &Path) -> Result<Outcome> {
    let cfg: SyntheticWorldConfig = resolve(&SyntheticWorldConfig::default(), o, seed)?;
    let vocab = TagVocabulary::default();
    let corpus = SyntheticCorpus::generate(cfg.clone(), &vocab)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let features = out_dir.join("features.shtf");
    corpus.feature_store()?.save(&features)?;
    io.output(&features);
    let manifest = out_dir.join("manifest.jsonl");
    save_manifest(&corpus.manifest(&vocab, "features.shtf")?, &manifest)?;
    io.output(&manifest);
    write(io, &out_dir.join("ground_truth.jsonl"), &format_ground_truth(&corpus.ground_truth()))?;
    println!("movies\t{}\ttrailers\t{}", corpus.movies.len(), corpus.trailers.len());
    Ok(Outcome {
        seed: cfg.seed,
        config: to_value(&cfg),
    })
}

// ---------------------------------------------------------------- split

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub trailer_subsets: Vec<usize>,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.71,
            val: 0.08,
            test: 0.21,
            trailer_subsets: Vec::new(),
            seed: 0,
        }
    }
}

fn manifest(io: &mut Io, path: &Path, vocab: &TagVocabulary) -> Result<Vec<ManifestEntry>> {
    io.input(path);
    load_manifest(path, vocab)
}

pub fn split(io: &mut Io, o: &Overrides, seed: Option<u64>, manifest_path: &Path, output: &Path) -> Result<Outcome> {
    let cfg: SplitConfig = resolve(&SplitConfig::default(), o, seed)?;
    let entries = manifest(io, manifest_path, &TagVocabulary::default())?;
    let s = make_splits(&entries, [cfg.train, cfg.val, cfg.test], cfg.seed, &cfg.trailer_subsets)?;
    s.save(output)?;
    io.output(output);
    println!(
        "train\t{}\tval\t{}\ttest\t{}\ttrain_trailers\t{}",
        s.train.len(),
        s.val.len(),
        s.test.len(),
        s.train_trailers.len()
    );
    Ok(Outcome {
        seed: cfg.seed,
        config: to_value(&cfg),
    })
}

fn load_split(io: &mut Io, path: &Path) -> Result<CorpusSplit> {
    io.input(path);
    CorpusSplit::load(path)
}

fn set_ids<'a>(split: &'a CorpusSplit, set: &str) -> Result<&'a [String]> {
    match set {
        "train" => Ok(&split.train),
        "val" => Ok(&split.val),
        "test" => Ok(&split.test),
        _ => Err(Error::Config(format!("unknown set `{set}` (train|val|test)"))),
    }
}

fn labeled(entries: &[ManifestEntry], ids: &[String], vocab: &TagVocabulary) -> Result<Vec<LabeledVideo>> {
    let by_id: HashMap<&str, &ManifestEntry> = entries.iter().map(|e| (e.id.as_str(), e)).collect();
    ids.iter()
        .map(|id| {
            let e = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Lookup(format!("video `{id}` not in manifest")))?;
            let (genres, keywords) = e.label_indices(vocab)?;
            Ok(LabeledVideo {
                id: id.clone(),
                labels: LabelSet { genres, keywords },
            })
        })
        .collect()
}

// ---------------------------------------------------------------- tags

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagDataConfig {
    /// `trailers` (the split's leak-free training trailers) or `movies`.
    pub train_on: String,
    /// Train on this nested trailer subset of the split; `0` uses all.
    pub trailer_subset: usize,
}

impl Default for TagDataConfig {
    fn default() -> Self {
        Self {
            train_on: "trailers".into(),
            trailer_subset: 0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train_tags_cmd(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    manifest_path: &Path,
    features: &[PathBuf],
    split_path: &Path,
    output: &Path,
) -> Result<Outcome> {
    let (cfg, data, effective) = resolve_pair(&TagTrainConfig::default(), &TagDataConfig::default(), o, seed)?;
    let vocab = TagVocabulary::default();
    let entries = manifest(io, manifest_path, &vocab)?;
    let split = load_split(io, split_path)?;
    let store = load_features(io, features)?;
    let ids: Vec<String> = match data.train_on.as_str() {
        "movies" => split.train.clone(),
        "trailers" if data.trailer_subset == 0 => split.train_trailers.clone(),
        "trailers" => split
            .trailer_subsets
            .get(&data.trailer_subset)
            .cloned()
            .ok_or_else(|| Error::Config(format!("split has no trailer subset of size {}", data.trailer_subset)))?,
        other => return Err(Error::Config(format!("unknown train_on `{other}` (trailers|movies)"))),
    };
    let videos = labeled(&entries, &ids, &vocab)?;
    let (model, report) = train_tags(&store, &videos, &vocab, &cfg)?;
    save_model(io, &model.params, &ModelCard::Tags { scoring: cfg.scoring }, output)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch\t{i}\tloss\t{l:.6}");
    }
    Ok(Outcome {
        seed: cfg.seed,
        config: effective,
    })
}

fn load_tag_model(io: &mut Io, path: &Path) -> Result<TagModel> {
    match load_model(io, path)? {
        (params, ModelCard::Tags { scoring }) => TagModel::from_params(params, scoring),
        _ => Err(wrong_model(path, "tag")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalTagsConfig {
    pub set: String,
    pub k: usize,
}

impl Default for EvalTagsConfig {
    fn default() -> Self {
        Self { set: "test".into(), k: 3 }
    }
}

/// Recall@k and MAP for both branches plus the uniform-ranking chance level.
pub fn tag_metrics(prefix: &str, preds: &[TagPrediction], truths: &[LabeledVideo], vocab: &TagVocabulary, k: usize) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for branch in [Branch::Genre, Branch::Keyword] {
        let scores: Vec<Vec<f32>> = preds.iter().map(|p| p.branch(branch).to_vec()).collect();
        let labels: Vec<Vec<usize>> = truths
            .iter()
            .map(|t| match branch {
                Branch::Genre => t.labels.genres.clone(),
                Branch::Keyword => t.labels.keywords.clone(),
            })
            .collect();
        // videos without labels in a branch carry no recall signal
        let keep: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_empty()).collect();
        if keep.is_empty() {
            continue;
        }
        let s: Vec<Vec<f32>> = keep.iter().map(|&i| scores[i].clone()).collect();
        let l: Vec<Vec<usize>> = keep.iter().map(|&i| labels[i].clone()).collect();
        out.push((format!("{prefix}.{branch}.recall@{k}"), recall_at_k(&s, &l, k)?));
        out.push((format!("{prefix}.{branch}.map"), mean_average_precision(&s, &l)?));
        if prefix == "score_average" {
            out.push((format!("chance.{branch}.recall@{k}"), chance_recall_at_k(&l, vocab.len(branch), k)));
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn eval_tags_cmd(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    manifest_path: &Path,
    features: &[PathBuf],
    split_path: &Path,
    model_path: &Path,
    output: &Path,
    predictions: Option<&Path>,
) -> Result<Outcome> {
    let cfg: EvalTagsConfig = resolve(&EvalTagsConfig::default(), o, None)?;
    let vocab = TagVocabulary::default();
    let entries = manifest(io, manifest_path, &vocab)?;
    let split = load_split(io, split_path)?;
    let store = load_features(io, features)?;
    let model = load_tag_model(io, model_path)?;
    let videos = labeled(&entries, set_ids(&split, &cfg.set)?, &vocab)?;
    let avg: Vec<TagPrediction> = videos
        .iter()
        .map(|v| model.infer_score_average(&store, &v.id))
        .collect::<Result<_>>()?;
    let mut metrics = vec![("videos".to_string(), videos.len() as f64)];
    metrics.extend(tag_metrics("score_average", &avg, &videos, &vocab, cfg.k)?);
    if model.layout.sequence.is_some() {
        let seq: Vec<TagPrediction> = videos
            .iter()
            .map(|v| model.infer_feature_lstm(&store, &v.id))
            .collect::<Result<_>>()?;
        metrics.extend(tag_metrics("feature_lstm", &seq, &videos, &vocab, cfg.k)?);
    }
    let text = format_metrics(&metrics);
    print!("{text}");
    write(io, output, &text)?;
    if let Some(p) = predictions {
        write(io, p, &format_predictions(&avg, &vocab)?)?;
    }
    Ok(Outcome {
        config: to_value(&cfg),
        seed: seed.unwrap_or(0),
    })
}

// ---------------------------------------------------------------- retrieve

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieveConfig {
    pub top_k: usize,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        Self { top_k: 5 }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn retrieve(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    model_path: &Path,
    video: &str,
    tag: &str,
    output: &Path,
) -> Result<Outcome> {
    let cfg: RetrieveConfig = resolve(&RetrieveConfig::default(), o, None)?;
    let vocab = TagVocabulary::default();
    let store = load_features(io, features)?;
    let model = load_tag_model(io, model_path)?;
    let series = shot_tag_response(&model, &vocab, &store, video, tag)?;
    let text: String = series.iter().map(|(id, s)| format!("{id}\t{s:.6}\n")).collect();
    write(io, output, &text)?;
    for (rank, (id, s)) in top_shots(&series, cfg.top_k).iter().enumerate() {
        println!("{}\t{id}\t{s:.6}", rank + 1);
    }
    Ok(Outcome {
        config: to_value(&cfg),
        seed: seed.unwrap_or(0),
    })
}

// ---------------------------------------------------------------- questions

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuestionSelection {
    pub set: String,
    /// `in_movie`, `cross_movie` or `both`.
    pub setting: String,
}

impl Default for QuestionSelection {
    fn default() -> Self {
        Self {
            set: "test".into(),
            setting: "both".into(),
        }
    }
}

pub fn gen_questions(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    split_path: &Path,
    output: &Path,
) -> Result<Outcome> {
    let (cfg, sel, effective) = resolve_pair(&QuestionConfig::default(), &QuestionSelection::default(), o, seed)?;
    let split = load_split(io, split_path)?;
    let store = load_features(io, features)?;
    let movies = set_ids(&split, &sel.set)?;
    let settings = match sel.setting.as_str() {
        "both" => vec![Setting::InMovie, Setting::CrossMovie],
        s => vec![s.parse()?],
    };
    let mut questions = Vec::new();
    for s in settings {
        let set = generate_questions(&store, movies, s, &cfg)?;
        println!(
            "{s}\tquestions\t{}\tskipped_movies\t{}\tskipped_windows\t{}",
            set.questions.len(),
            set.skipped_movies.len(),
            set.skipped_windows
        );
        questions.extend(set.questions);
    }
    write(io, output, &format_questions(&questions))?;
    Ok(Outcome {
        seed: cfg.seed,
        config: effective,
    })
}

fn load_questions(io: &mut Io, path: &Path) -> Result<Vec<PredictionQuestion>> {
    parse_questions(&read(io, path)?)
}

// ---------------------------------------------------------------- temporal

pub fn train_temporal(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    questions: &Path,
    validation: Option<&Path>,
    output: &Path,
) -> Result<Outcome> {
    let cfg: TemporalTrainConfig = resolve(&TemporalTrainConfig::default(), o, seed)?;
    let store = load_features(io, features)?;
    let train = load_questions(io, questions)?;
    let val = match validation {
        Some(p) => load_questions(io, p)?,
        None => Vec::new(),
    };
    let (model, report) = train_next_shot(&train, &val, &store, &cfg)?;
    save_model(io, &model.params, &ModelCard::Temporal { readout: cfg.readout }, output)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        match report.validation_accuracy.get(i) {
            Some(a) => println!("epoch\t{i}\tloss\t{l:.6}\tval_accuracy\t{a:.6}"),
            None => println!("epoch\t{i}\tloss\t{l:.6}"),
        }
    }
    println!("best_epoch\t{}", report.best_epoch);
    Ok(Outcome {
        seed: cfg.seed,
        config: to_value(&cfg),
    })
}

fn accuracy_metrics(prefix: &str, report: &AccuracyReport) -> Vec<(String, f64)> {
    let mut out = vec![(format!("{prefix}.accuracy"), report.accuracy())];
    for (s, acc) in report.accuracy_by_setting() {
        out.push((format!("{prefix}.{s}.accuracy"), acc));
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn eval_temporal(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    questions: &Path,
    model_path: Option<&Path>,
    output: &Path,
    results: Option<&Path>,
) -> Result<Outcome> {
    // without a checkpoint the model is a fresh initialisation from these settings
    let cfg: TemporalTrainConfig = resolve(&TemporalTrainConfig::default(), o, seed)?;
    let store = load_features(io, features)?;
    let qs = load_questions(io, questions)?;
    let mut effective = to_value(&cfg);
    let model = match model_path {
        Some(p) => match load_model(io, p)? {
            (params, card @ ModelCard::Temporal { readout }) => {
                effective = json!({ "model": card });
                NextShotModel::from_params(params, readout)?
            }
            _ => return Err(wrong_model(p, "next-shot")),
        },
        None => NextShotModel::new(
            store.dim(),
            cfg.hidden,
            &cfg.scorer_widths,
            cfg.readout,
            &mut derive_rng(cfg.seed, "temporal_init", 0),
        )?,
    };
    let lstm = evaluate_accuracy(&model, &qs, &store)?;
    let average = evaluate_accuracy(&AverageCosineBaseline, &qs, &store)?;
    let mut metrics = vec![("questions".to_string(), qs.len() as f64)];
    metrics.extend(accuracy_metrics("lstm", &lstm));
    metrics.extend(accuracy_metrics("average", &average));
    let text = format_metrics(&metrics);
    print!("{text}");
    write(io, output, &text)?;
    if let Some(p) = results {
        write(io, p, &lstm.format_results())?;
    }
    Ok(Outcome {
        seed: cfg.seed,
        config: effective,
    })
}

// ---------------------------------------------------------------- qa

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// Width of the hashing provider; ignored with an embedding table.
    pub embed_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self { embed_dim: EMBED_DIM }
    }
}

fn provider(io: &mut Io, table: Option<&Path>, embed_dim: usize) -> Result<(Box<dyn EmbeddingProvider>, String)> {
    Ok(match table {
        Some(p) => (Box::new(LookupEmbedding::parse(&read(io, p)?)?), "lookup".to_string()),
        None => (Box::new(HashingEmbedding::new(embed_dim)?), "hashing".to_string()),
    })
}

fn load_items(io: &mut Io, path: &Path, provider: &dyn EmbeddingProvider, store: &FeatureStore) -> Result<Vec<crate::qa::QaExample>> {
    let items = parse_items(&read(io, path)?)?;
    prepare_items(&items, provider, store)
}

#[allow(clippy::too_many_arguments)]
pub fn train_qa_cmd(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    items: &Path,
    validation: Option<&Path>,
    embeddings: Option<&Path>,
    output: &Path,
) -> Result<Outcome> {
    let (cfg, emb, effective) = resolve_pair(&QaTrainConfig::default(), &EmbeddingConfig::default(), o, seed)?;
    let store = load_features(io, features)?;
    let (prov, kind) = provider(io, embeddings, emb.embed_dim)?;
    let train = load_items(io, items, prov.as_ref(), &store)?;
    let val = match validation {
        Some(p) => load_items(io, p, prov.as_ref(), &store)?,
        None => Vec::new(),
    };
    let (model, report) = train_qa(&train, &val, &cfg)?;
    let card = ModelCard::Qa {
        embed_dim: prov.dim(),
        provider: kind,
    };
    save_model(io, &model.params, &card, output)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch\t{i}\tloss\t{l:.6}");
    }
    println!("best_epoch\t{}\tstopped_early\t{}", report.best_epoch, report.stopped_early);
    Ok(Outcome {
        seed: cfg.seed,
        config: effective,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn eval_qa_cmd(
    io: &mut Io,
    o: &Overrides,
    seed: Option<u64>,
    features: &[PathBuf],
    items: &Path,
    model_path: &Path,
    embeddings: Option<&Path>,
    output: &Path,
    results: Option<&Path>,
) -> Result<Outcome> {
    if let Some(k) = o.keys().next() {
        return Err(Error::Config(format!("unknown configuration key `{k}`")));
    }
    let store = load_features(io, features)?;
    let (params, card) = load_model(io, model_path)?;
    let ModelCard::Qa { embed_dim, provider: kind } = card else {
        return Err(wrong_model(model_path, "qa"));
    };
    let (prov, used) = provider(io, embeddings, embed_dim)?;
    if used != kind || prov.dim() != embed_dim {
        return Err(Error::Config(format!(
            "model was trained with a {kind} provider of width {embed_dim}, got {used} of width {}",
            prov.dim()
        )));
    }
    let model = QaModel::from_params(params, embed_dim)?;
    let examples = load_items(io, items, prov.as_ref(), &store)?;
    let report = evaluate_qa(&model, &examples)?;
    let metrics = vec![
        ("items".to_string(), examples.len() as f64),
        ("accuracy".to_string(), report.accuracy()),
    ];
    let text = format_metrics(&metrics);
    print!("{text}");
    write(io, output, &text)?;
    if let Some(p) = results {
        write(io, p, &report.format_results())?;
    }
    Ok(Outcome {
        config: json!({}),
        seed: seed.unwrap_or(0),
    })
}
