//! Sequence directory layout:
//!
//! ```text
//! <seq>/seqinfo.ini
//! <seq>/det/det.txt
//! <seq>/gt/gt.txt        (optional)
//! <seq>/warps.txt        (optional)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use trackkit::metrics::GtBox;
use trackkit::moio::{self, Manifest, PipelineConfig};
use trackkit::pipeline::{LabelledSequence, SequenceInput};
use trackkit::sim::SimOutput;

use crate::CliError;

pub const SEQINFO: &str = "seqinfo.ini";
pub const DET: &str = "det/det.txt";
pub const GT: &str = "gt/gt.txt";
pub const WARPS: &str = "warps.txt";

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads a file, records its digest in the manifest and attaches the path to parse errors.
fn load<T>(
    path: &Path,
    manifest: &mut Manifest,
    parse: impl FnOnce(&str) -> trackkit::Result<T>,
) -> Result<T, CliError> {
    let text = read(path)?;
    manifest.add_input(path.display().to_string(), text.as_bytes());
    parse(&text).map_err(|e| CliError::from_lib(e).context(&path.display().to_string()))
}

pub fn load_input(dir: &Path, cfg: &PipelineConfig, manifest: &mut Manifest) -> Result<SequenceInput, CliError> {
    let mut meta = load(&dir.join(SEQINFO), manifest, moio::parse_seqinfo)?;
    meta.scene_kind = cfg.scenes.kind(&meta.name);
    let dets = load(&dir.join(DET), manifest, moio::parse_detections)?;
    if dets.skipped > 0 {
        log::warn!("{}: skipped {} degenerate detections", meta.name, dets.skipped);
    }
    let warp_path = dir.join(WARPS);
    let warps = if warp_path.exists() {
        Some(load(&warp_path, manifest, moio::parse_warps)?)
    } else {
        None
    };
    let height_samples = match &cfg.fullbox.height_samples {
        Some(p) => {
            let p = PathBuf::from(p);
            let p = if p.is_absolute() { p } else { dir.join(p) };
            Some(load(&p, manifest, moio::parse_height_samples)?)
        }
        None => None,
    };
    Ok(SequenceInput {
        meta,
        dets: dets.frames,
        warps,
        height_samples,
    })
}

pub fn load_gt(dir: &Path, manifest: &mut Manifest) -> Result<Vec<GtBox>, CliError> {
    load(&dir.join(GT), manifest, moio::parse_gt)
}

pub fn load_labelled(dir: &Path, cfg: &PipelineConfig, manifest: &mut Manifest) -> Result<LabelledSequence, CliError> {
    Ok(LabelledSequence {
        input: load_input(dir, cfg, manifest)?,
        gt: load_gt(dir, manifest)?,
    })
}

pub fn load_tracks(path: &Path, manifest: &mut Manifest) -> Result<Vec<trackkit::Trajectory>, CliError> {
    load(path, manifest, moio::parse_tracks)
}

pub fn write_sim(dir: &Path, sim: &SimOutput) -> Result<(), CliError> {
    write(&dir.join(SEQINFO), &moio::write_seqinfo(&sim.meta))?;
    write(&dir.join(DET), &moio::write_detections(&sim.dets))?;
    write(&dir.join(GT), &moio::write_gt(&sim.gt))?;
    if !sim.warps.is_empty() {
        write(&dir.join(WARPS), &moio::write_warps(&sim.warps))?;
    }
    Ok(())
}
