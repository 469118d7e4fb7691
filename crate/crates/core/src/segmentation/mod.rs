//! Shot boundary detection by adaptive-threshold histogram differencing.

mod detector;
mod frames;
mod histogram;
mod synthetic;

pub use detector::{
    boundary_scores, detect_cuts, detect_shots, format_shot_list, merge_short_shots, parse_shot_list, SegmenterParams,
    Shot, ShotId,
};
pub use frames::{Frame, FrameSequence, FSEQ_MAGIC, FSEQ_VERSION};
pub use histogram::{boundary_score, frame_histogram, hsv_bin, rgb_to_hsv, CHI_SQUARE_EPS};
pub use synthetic::{solid_sequence, synthesize_cut_sequence, CutSequence};
