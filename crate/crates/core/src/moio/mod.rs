//! File formats: MOT Challenge CSVs, `seqinfo.ini`, warp and height-sample
//! files, the pipeline configuration and run manifests.

mod config;
mod manifest;
mod mot;
mod seqinfo;

pub use config::{
    load_config, AnchorChoice, Config, EvalConfig, FullboxConfig, FullboxMode, KeySpec, PipelineConfig, SceneConfig,
    Source, KEYS,
};
pub use manifest::{sha256_hex, Manifest, ManifestEntry};
pub use mot::{
    gt_trajectories, parse_detections, parse_gt, parse_tracks, quantize_box, quantize_coord, quantize_tracks,
    quantize_value, write_detections, write_gt, write_tracks, Detections,
};
pub use seqinfo::{parse_height_samples, parse_seqinfo, parse_warps, write_seqinfo, write_warps};
