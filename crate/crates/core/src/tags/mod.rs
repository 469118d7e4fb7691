//! Genre and keyword prediction from trailer-level labels, ranking metrics and
//! per-shot tag responses.

mod io;
mod metrics;
mod model;
mod retrieval;
mod train;
mod vocab;

pub use io::{format_predictions, parse_predictions};
pub use metrics::{
    average_precision, chance_recall_at_k, mean_average_precision, mean_average_precision_by_video, rank_labels,
    recall_at_k,
};
pub use model::{multitask_loss, scores_from_logits, LabelSet, Scoring, SequenceHead, TagLayout, TagModel, TagPrediction};
pub use retrieval::{shot_tag_response, top_shots};
pub use train::{train_pooled, train_sequence_head, train_tags, LabeledVideo, TagTrainConfig, TagTrainReport};
pub use vocab::{Branch, TagVocabulary};

#[cfg(test)]
mod tests;
