//! Next-shot prediction: question generation, the LSTM candidate scorer, the
//! average-cosine baseline and accuracy evaluation.

mod eval;
mod model;
mod questions;
mod train;


pub use eval::{evaluate_accuracy, AccuracyReport, QuestionOutcome, EVAL_BATCH};
pub use model::{
    argmax, softmax, AverageCosineBaseline, CandidateChooser, ContextReadout, NextShotLayout, NextShotModel,
    QuestionBatch,
};
pub use questions::{
    format_questions, generate_questions, parse_questions, PredictionQuestion, QuestionConfig, QuestionSet, Setting,
};
pub use train::{continue_training, train_next_shot, TemporalTrainConfig, TemporalTrainReport};
