//! Shot and video features by sparse frame sampling and average pooling.

mod encode;
mod extractor;
mod sampling;
mod store;

pub(crate) use encode::mean_of;
pub use encode::{encode_shot, encode_video, extract_store, pool_projected, FrameSource, ShotSource};
pub use extractor::{FrameFeatureExtractor, HistogramEdgeExtractor};
pub use sampling::{sample_frames, sample_shots, Mode};
pub use store::{FeatureStore, SHTF_MAGIC, SHTF_VERSION};

#[cfg(test)]
mod tests;
