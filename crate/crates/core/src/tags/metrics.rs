//! Rank-based multi-label metrics. Ties rank the lower index first.

use crate::error::{Error, Result};

/// Label indices ordered by descending score, ties by ascending index.
pub fn rank_labels(scores: &[f32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn check(scores: &[Vec<f32>], truths: &[Vec<usize>]) -> Result<usize> {
    if scores.len() != truths.len() {
        return Err(Error::shape("metric", &[scores.len()], &[truths.len()]));
    }
    let labels = scores.first().map_or(0, Vec::len);
    for (v, (s, t)) in scores.iter().zip(truths).enumerate() {
        if s.len() != labels {
            return Err(Error::shape("metric", &[labels], &[s.len()]));
        }
        if let Some(&bad) = t.iter().find(|&&l| l >= labels) {
            return Err(Error::Index(format!("label {bad} of {labels} for video {v}")));
        }
    }
    Ok(labels)
}

/// Mean over videos with non-empty truth of `|top-k ∩ truth| / min(k, |truth|)`.
/// Zero when no video has any truth.
pub fn recall_at_k(scores: &[Vec<f32>], truths: &[Vec<usize>], k: usize) -> Result<f64> {
    check(scores, truths)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for (s, t) in scores.iter().zip(truths) {
        if t.is_empty() {
            continue;
        }
        let top = rank_labels(s);
        let hits = top.iter().take(k).filter(|l| t.contains(l)).count();
        total += hits as f64 / k.min(t.len()) as f64;
        counted += 1;
    }
    Ok(if counted == 0 { 0.0 } else { total / counted as f64 })
}

/// Expected [`recall_at_k`] of a uniformly random label ranking over
/// `labels` labels.
pub fn chance_recall_at_k(truths: &[Vec<usize>], labels: usize, k: usize) -> f64 {
    let scored: Vec<f64> = truths
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| (k.min(labels) * t.len()) as f64 / labels as f64 / k.min(t.len()) as f64)
        .collect();
    if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    }
}

/// `Σ precision@i · rel(i) / #positives` over a ranked relevance list.
pub fn average_precision(relevant_in_rank_order: &[bool]) -> Option<f64> {
    let positives = relevant_in_rank_order.iter().filter(|&&r| r).count();
    if positives == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in relevant_in_rank_order.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Label-centric MAP: per label, AP of the video ranking by that label's
/// score; averaged over labels with at least one positive.
pub fn mean_average_precision(scores: &[Vec<f32>], truths: &[Vec<usize>]) -> Result<f64> {
    let labels = check(scores, truths)?;
    let mut aps = Vec::new();
    for l in 0..labels {
        let column: Vec<f32> = scores.iter().map(|s| s[l]).collect();
        let ranked: Vec<bool> = rank_labels(&column).iter().map(|&v| truths[v].contains(&l)).collect();
        aps.extend(average_precision(&ranked));
    }
    Ok(if aps.is_empty() { 0.0 } else { aps.iter().sum::<f64>() / aps.len() as f64 })
}

/// Video-centric MAP: per video, AP of its label ranking; averaged over videos
/// with at least one positive.
pub fn mean_average_precision_by_video(scores: &[Vec<f32>], truths: &[Vec<usize>]) -> Result<f64> {
    check(scores, truths)?;
    let aps: Vec<f64> = scores
        .iter()
        .zip(truths)
        .filter_map(|(s, t)| {
            let ranked: Vec<bool> = rank_labels(s).iter().map(|l| t.contains(l)).collect();
            average_precision(&ranked)
        })
        .collect();
    Ok(if aps.is_empty() { 0.0 } else { aps.iter().sum::<f64>() / aps.len() as f64 })
}
