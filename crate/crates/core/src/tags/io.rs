use crate::error::{Error, Result};

use super::{Branch, TagPrediction, TagVocabulary};

/// `video_id<TAB>branch<TAB>label<TAB>score` for every label of every video,
/// scores at 6 decimal places.
pub fn format_predictions(predictions: &[TagPrediction], vocab: &TagVocabulary) -> Result<String> {
    let mut out = String::new();
    for p in predictions {
        for branch in [Branch::Genre, Branch::Keyword] {
            let scores = p.branch(branch);
            if scores.len() != vocab.len(branch) {
                return Err(Error::shape("predictions", &[scores.len()], &[vocab.len(branch)]));
            }
            for (i, s) in scores.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\t{:.6}\n", p.video_id, branch, vocab.name(branch, i)?, s));
            }
        }
    }
    Ok(out)
}

/// Inverse of [`format_predictions`] up to the printed precision. Labels
/// missing for a video read as zero.
pub fn parse_predictions(text: &str, vocab: &TagVocabulary) -> Result<Vec<TagPrediction>> {
    let mut out: Vec<TagPrediction> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: n + 1, reason };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(err("expected 4 tab-separated fields".into()));
        }
        let branch = match f[1] {
            "genre" => Branch::Genre,
            "keyword" => Branch::Keyword,
            other => return Err(err(format!("unknown branch `{other}`"))),
        };
        let label = vocab.index(branch, f[2])?;
        let score: f32 = f[3].parse().map_err(|_| err(format!("bad score `{}`", f[3])))?;
        if out.last().is_none_or(|p| p.video_id != f[0]) {
            out.push(TagPrediction {
                video_id: f[0].to_string(),
                genres: vec![0.0; vocab.len(Branch::Genre)],
                keywords: vec![0.0; vocab.len(Branch::Keyword)],
            });
        }
        let p = out.last_mut().expect("just pushed");
        match branch {
            Branch::Genre => p.genres[label] = score,
            Branch::Keyword => p.keywords[label] = score,
        }
    }
    Ok(out)
}
