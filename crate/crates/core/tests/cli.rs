//! End-to-end runs of the `storyline` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use storyline::dataset::GroundTruthRecord;
use storyline::qa::{format_items, QaItem};
use storyline::segmentation::ShotId;

const TINY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/tiny-world.conf");
const TOPIC_WORDS: [&str; 8] = ["harbor", "desert", "forest", "city", "snow", "jungle", "space", "castle"];

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storyline"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "storyline {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn metrics(path: &Path) -> BTreeMap<String, f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('\t').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

/// Four-shot clips whose answer is the clip's most frequent topic.
fn write_items(dir: &Path, movies: &[String], path: &str) {
    let truth: Vec<GroundTruthRecord> = fs::read_to_string(dir.join("w/ground_truth.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let mut items = Vec::new();
    for record in truth.iter().filter(|r| movies.contains(&r.id)) {
        for start in (0..record.topics.len().saturating_sub(4)).step_by(4) {
            let window = &record.topics[start..start + 4];
            let dominant = (0..8).max_by_key(|t| (window.iter().filter(|&&x| x == *t).count(), usize::MAX - t)).unwrap();
            let distractors = (1..5).map(|d| (dominant + 2 * d) % 8);
            let mut answers: Vec<String> = distractors.map(|t| TOPIC_WORDS[t].to_string()).collect();
            let correct = start / 4 % 5;
            answers.insert(correct, TOPIC_WORDS[dominant].to_string());
            items.push(QaItem {
                qid: format!("{}:{start}", record.id),
                question: "where does this take place".into(),
                answers,
                clip: (start..start + 4).map(|s| ShotId::new(record.id.clone(), s as u32)).collect(),
                correct_index: correct,
            });
        }
    }
    fs::write(dir.join(path), format_items(&items).unwrap()).unwrap();
}

fn split_ids(dir: &Path, set: &str) -> Vec<String> {
    let split: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("split.json")).unwrap()).unwrap();
    serde_json::from_value(split[set].clone()).unwrap()
}

#[test]
fn tiny_world_runs_every_stage() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out-dir", "w", "--config", TINY, "--seed", "3"]);
    ok(d, &["split", "--manifest", "w/manifest.jsonl", "--output", "split.json", "--set", "train=0.6", "--set", "val=0.2", "--set", "test=0.2"]);
    let f = "w/features.shtf";
    ok(d, &["train-tags", "--features", f, "--manifest", "w/manifest.jsonl", "--split", "split.json", "--output", "tags.ckpt", "--set", "epochs=30"]);
    ok(d, &["eval-tags", "--features", f, "--manifest", "w/manifest.jsonl", "--split", "split.json", "--model", "tags.ckpt", "--output", "tags.tsv"]);
    let m = metrics(&d.join("tags.tsv"));
    for key in ["score_average.genre.recall@3", "score_average.keyword.map", "feature_lstm.genre.map", "chance.genre.recall@3"] {
        let v = m[key];
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }

    let test_movie = &split_ids(d, "test")[0];
    let stdout = ok(d, &["retrieve", "--features", f, "--model", "tags.ckpt", "--video", test_movie, "--tag", "Drama", "--output", "response.tsv"]);
    let response = fs::read_to_string(d.join("response.tsv")).unwrap();
    assert!(response.lines().count() >= 60);
    assert!(response.lines().all(|l| l.split('\t').count() == 2));
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.starts_with("1\t"));

    ok(d, &["gen-questions", "--features", f, "--split", "split.json", "--set", "set=train", "--set", "setting=in_movie", "--set", "stride=2", "--output", "q_train.tsv"]);
    ok(d, &["gen-questions", "--features", f, "--split", "split.json", "--set", "set=val", "--set", "setting=in_movie", "--output", "q_val.tsv"]);
    ok(d, &["gen-questions", "--features", f, "--split", "split.json", "--output", "q_test.tsv"]);
    ok(d, &["train-temporal", "--features", f, "--questions", "q_train.tsv", "--validation", "q_val.tsv", "--output", "temporal.ckpt", "--set", "hidden=32", "--set", "scorer_widths=32,16", "--set", "epochs=3"]);
    ok(d, &["eval-temporal", "--features", f, "--questions", "q_test.tsv", "--model", "temporal.ckpt", "--output", "temporal.tsv", "--results", "per_question.tsv"]);
    let m = metrics(&d.join("temporal.tsv"));
    let questions = fs::read_to_string(d.join("q_test.tsv")).unwrap().lines().count();
    assert_eq!(m["questions"] as usize, questions);
    assert!(m.contains_key("lstm.in_movie.accuracy") && m.contains_key("average.cross_movie.accuracy"));
    let per_question = fs::read_to_string(d.join("per_question.tsv")).unwrap();
    assert_eq!(per_question.lines().count(), questions);
    assert!(per_question.lines().all(|l| l.split('\t').count() == 3));

    write_items(d, &split_ids(d, "train"), "qa_train.tsv");
    write_items(d, &split_ids(d, "test"), "qa_test.tsv");
    ok(d, &["train-qa", "--features", f, "--items", "qa_train.tsv", "--output", "qa.ckpt", "--set", "epochs=5", "--set", "embed_dim=64"]);
    ok(d, &["eval-qa", "--features", f, "--items", "qa_test.tsv", "--model", "qa.ckpt", "--output", "qa.tsv", "--results", "qa_pred.tsv"]);
    let m = metrics(&d.join("qa.tsv"));
    assert!((0.0..=1.0).contains(&m["accuracy"]));
    assert_eq!(
        fs::read_to_string(d.join("qa_pred.tsv")).unwrap().lines().count(),
        fs::read_to_string(d.join("qa_test.tsv")).unwrap().lines().count()
    );

    let log = fs::read_to_string(d.join("storyline-runs.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 12);
    assert_eq!(records[2]["command"], "train-tags");
    assert!(records[2]["input_digests"][f].as_str().unwrap().len() == 64);
    assert!(start.elapsed() < Duration::from_secs(60), "pipeline took {:?}", start.elapsed());
}

#[test]
fn same_seed_same_bytes() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let d = d.path();
        ok(d, &["synth", "--out-dir", "w", "--config", TINY, "--seed", "9"]);
        ok(d, &["split", "--manifest", "w/manifest.jsonl", "--output", "split.json", "--set", "train=0.6", "--set", "val=0.2", "--set", "test=0.2"]);
        write_items(d, &split_ids(d, "train"), "qa.tsv");
        ok(d, &["train-qa", "--features", "w/features.shtf", "--items", "qa.tsv", "--output", "qa.ckpt", "--set", "epochs=2", "--set", "embed_dim=32"]);
    }
    for file in ["w/features.shtf", "w/manifest.jsonl", "w/ground_truth.jsonl", "split.json", "qa.ckpt", "qa.ckpt.json"] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        let b = fs::read(dirs[1].path().join(file)).unwrap();
        assert!(a == b, "{file} differs between identical runs");
    }
}

#[test]
fn untrained_next_shot_model_is_at_chance() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--out-dir", "w", "--seed", "1"]);
    ok(d, &["split", "--manifest", "w/manifest.jsonl", "--output", "split.json", "--set", "train=0.1", "--set", "val=0.1", "--set", "test=0.8"]);
    ok(d, &["gen-questions", "--features", "w/features.shtf", "--split", "split.json", "--set", "stride=4", "--output", "q.tsv"]);
    ok(d, &["eval-temporal", "--features", "w/features.shtf", "--questions", "q.tsv", "--output", "m.tsv"]);
    let m = metrics(&d.join("m.tsv"));
    let n = m["questions"];
    let sd = (1.0 / 32.0 * (31.0 / 32.0) / n).sqrt();
    let acc = m["lstm.accuracy"];
    assert!(n >= 2000.0, "{n} questions");
    assert!((acc - 1.0 / 32.0).abs() <= 4.0 * sd, "accuracy {acc} over {n} questions");
}

#[test]
fn failures_print_one_error_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = run(d, &["synth", "--out-dir", "w", "--set", "movis=3"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error\tconfig\t"), "{err}");
    assert!(err.contains("movis"));
    assert_eq!(err.lines().count(), 1);

    let out = run(d, &["split", "--manifest", "absent.jsonl", "--output", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error\tio\t"));
    assert!(!d.join("storyline-runs.jsonl").exists());

    let out = run(d, &["train-tags", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}
