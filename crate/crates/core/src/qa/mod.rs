//! Multiple-choice answering over a clip: text embedding providers, the
//! shared row scorer, training and evaluation, plus a planted synthetic task.

mod embed;
mod item;
mod model;
mod planted;
mod train;


pub use embed::{fnv1a64, tokenize, EmbeddingProvider, HashingEmbedding, LookupEmbedding, EMBED_DIM};
pub use item::{format_items, parse_items, QaItem};
pub use model::{
    encode_clip, evaluate_qa, prepare_item, prepare_items, qa_forward, QaExample, QaLayout, QaModel, QaOutcome,
    QaReport,
};
pub use planted::{planted_examples, PlantedConfig, PlantedTask};
pub use train::{train_qa, QaTrainConfig, QaTrainReport};
