//! Manifests, corpus splits and the synthetic movie/trailer generator.

mod manifest;
mod split;
mod synthetic;

pub use manifest::{format_manifest, load_manifest, parse_manifest, save_manifest, ManifestEntry, VideoKind};
pub use split::{make_splits, CorpusSplit};
pub use synthetic::{
    distinctiveness_ranking, format_ground_truth, parse_ground_truth, GroundTruthRecord, SyntheticCorpus,
    SyntheticVideo, SyntheticWorldConfig, World,
};
