//! Shot-based movie understanding.
//!
//! A visual module learns shot features from trailer-level genre and keyword
//! tags; a temporal module learns movie structure by choosing the true next
//! shot among distractors. Everything needed to verify both at desk scale is
//! included: a small autodiff engine, a histogram shot detector, sparse-sampling
//! shot encoders, ranking metrics and a synthetic movie/trailer generator.

pub mod autodiff;
pub mod cli;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod nn;
pub mod qa;
pub mod report;
pub mod rng;
pub mod segmentation;
pub mod tags;
pub mod temporal;

pub use error::{Error, Result};
