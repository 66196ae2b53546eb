//! End-to-end sequence processing: full-box extension, tracking,
//! post-processing and evaluation, plus the component ablation grid.
//!
//! Outputs are quantized at every stage boundary exactly as a MOT file round
//! trip would, so running the stages through files gives the same result as
//! running them in process.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::association::Tracker;
use crate::error::{Error, Result};
use crate::fullbox::{auto_height_samples, extend_box, fit_height_model, ExtendMode, HeightAnchor, HeightModels};
use crate::geom::{BBox, SceneKind, SequenceMeta, Trajectory};
use crate::metrics::{evaluate, filter_mot17, GtBox, SceneTable, SequenceStats, PEDESTRIAN_CLASS};
use crate::moio::{quantize_tracks, AnchorChoice, EvalConfig, FullboxConfig, FullboxMode, PipelineConfig};
use crate::motion::WarpTable;
use crate::postprocess::{run_steps, Step};

/// Everything needed to track one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    /// Scene kind must already be resolved from the config.
    pub meta: SequenceMeta,
    pub dets: BTreeMap<u32, Vec<BBox<f64>>>,
    pub warps: Option<WarpTable<f64>>,
    pub height_samples: Option<Vec<(f64, f64)>>,
}

/// A sequence with its ground truth, for evaluation and ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSequence {
    pub input: SequenceInput,
    pub gt: Vec<GtBox>,
}

fn height_models(
    dets: &BTreeMap<u32, Vec<BBox<f64>>>,
    meta: &SequenceMeta,
    cfg: &FullboxConfig,
    samples: Option<&[(f64, f64)]>,
) -> Option<HeightModels<f64>> {
    let anchors: &[HeightAnchor] = match cfg.anchor {
        AnchorChoice::Top => &[HeightAnchor::TopY],
        AnchorChoice::Bottom => &[HeightAnchor::BottomY],
        AnchorChoice::Both => &[HeightAnchor::TopY, HeightAnchor::BottomY],
    };
    let mut models = HeightModels::default();
    for &anchor in anchors {
        let data: Vec<(f64, f64)> = match samples {
            Some(s) => s.to_vec(),
            None => {
                let pool: Vec<BBox<f64>> = if cfg.sample_frame == 0 {
                    dets.values().flatten().copied().collect()
                } else {
                    dets.get(&cfg.sample_frame).cloned().unwrap_or_default()
                };
                auto_height_samples(&pool, meta, anchor, cfg.sample_min_score, cfg.margin)
            }
        };
        match fit_height_model(&data, anchor) {
            Ok(m) => match anchor {
                HeightAnchor::TopY => models.top = Some(m),
                HeightAnchor::BottomY => models.bottom = Some(m),
            },
            Err(e) => log::warn!("{}: height model ({anchor:?}) unavailable: {e}", meta.name),
        }
    }
    (models.top.is_some() || models.bottom.is_some()).then_some(models)
}

/// Applies full-box extension to every detection when enabled.
pub fn extend_detections(
    dets: &BTreeMap<u32, Vec<BBox<f64>>>,
    meta: &SequenceMeta,
    cfg: &FullboxConfig,
    samples: Option<&[(f64, f64)]>,
) -> BTreeMap<u32, Vec<BBox<f64>>> {
    if !cfg.enabled {
        return dets.clone();
    }
    let mode = match cfg.mode {
        FullboxMode::Aspect => ExtendMode::AspectRatio(cfg.aspect_ratio),
        FullboxMode::Height => match height_models(dets, meta, cfg, samples) {
            Some(m) => ExtendMode::HeightModel(m),
            None => {
                log::warn!("{}: falling back to aspect-ratio extension", meta.name);
                ExtendMode::AspectRatio(cfg.aspect_ratio)
            }
        },
    };
    dets.iter()
        .map(|(&f, v)| (f, v.iter().map(|b| extend_box(b, meta, &mode, cfg.margin)).collect()))
        .collect()
}

/// Runs the tracker over every frame of the sequence.
pub fn track_sequence(input: &SequenceInput, cfg: &PipelineConfig) -> Result<Vec<Trajectory<f64>>> {
    let meta = &input.meta;
    let run = || -> Result<Vec<Trajectory<f64>>> {
        let dets = extend_detections(&input.dets, meta, &cfg.fullbox, input.height_samples.as_deref());
        let mut tcfg = cfg.tracker.clone();
        if cfg.use_warps && meta.scene_kind == SceneKind::Dynamic {
            tcfg.warps = input.warps.clone();
        }
        let last = dets.keys().next_back().copied().unwrap_or(0).max(meta.length);
        let mut tracker = Tracker::default();
        for frame in 1..=last {
            let d = dets.get(&frame).map(|v| v.as_slice()).unwrap_or(&[]);
            tracker.step(frame, d, &tcfg, meta)?;
        }
        Ok(quantize_tracks(&tracker.into_trajectories()))
    };
    run().map_err(|e| e.in_sequence(&meta.name, "track"))
}

/// Runs the configured post-processing steps.
pub fn postprocess_sequence(
    tracks: Vec<Trajectory<f64>>,
    meta: &SequenceMeta,
    cfg: &PipelineConfig,
) -> Result<Vec<Trajectory<f64>>> {
    run_steps(tracks, meta, &cfg.postprocess)
        .map(|t| quantize_tracks(&t))
        .map_err(|e| e.in_sequence(&meta.name, "postprocess"))
}

/// Tracking followed by post-processing.
pub fn run_sequence(input: &SequenceInput, cfg: &PipelineConfig) -> Result<Vec<Trajectory<f64>>> {
    let tracks = track_sequence(input, cfg)?;
    postprocess_sequence(tracks, &input.meta, cfg)
}

/// Scores predictions against raw ground-truth rows.
pub fn evaluate_sequence(pred: &[Trajectory<f64>], gt: &[GtBox], cfg: &EvalConfig) -> SequenceStats {
    if cfg.preprocess {
        let (gt_tracks, pred) = filter_mot17(gt, pred, cfg.visibility_thresh);
        evaluate(&pred, &gt_tracks, &cfg.options)
    } else {
        let mut tracks: BTreeMap<u64, Trajectory<f64>> = BTreeMap::new();
        for g in gt {
            if g.consider && g.class == PEDESTRIAN_CLASS && g.visibility >= cfg.visibility_thresh {
                tracks.entry(g.id).or_insert_with(|| Trajectory::new(g.id)).push(g.bbox);
            }
        }
        let gt_tracks: Vec<_> = tracks.into_values().collect();
        evaluate(pred, &gt_tracks, &cfg.options)
    }
}

/// Wraps clean trajectories as ground-truth rows.
pub fn gt_rows(tracks: &[Trajectory<f64>]) -> Vec<GtBox> {
    tracks
        .iter()
        .flat_map(|t| {
            t.boxes.values().map(move |b| GtBox {
                id: t.id,
                bbox: *b,
                consider: true,
                class: PEDESTRIAN_CLASS,
                visibility: 1.0,
            })
        })
        .collect()
}

/// Processes sequences in parallel; results keep the input order.
pub fn run_many(seqs: &[SequenceInput], cfg: &PipelineConfig) -> Vec<Result<Vec<Trajectory<f64>>>> {
    seqs.par_iter().map(|s| run_sequence(s, cfg)).collect()
}

/// On/off switches of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Components {
    /// Full-box extension.
    pub fullbox: bool,
    /// Camera-motion compensation.
    pub motion_comp: bool,
    /// Linear interpolation followed by GSI.
    pub gsi: bool,
    /// Track merge.
    pub merge: bool,
}

impl Components {
    /// The cumulative rows: baseline, +GSI, +MC, +FB, +TM.
    pub fn cumulative() -> Vec<Components> {
        let mut c = Components::default();
        let mut rows = vec![c];
        c.gsi = true;
        rows.push(c);
        c.motion_comp = true;
        rows.push(c);
        c.fullbox = true;
        rows.push(c);
        c.merge = true;
        rows.push(c);
        rows
    }

    /// All sixteen combinations.
    pub fn full_grid() -> Vec<Components> {
        (0..16u8)
            .map(|m| Components {
                fullbox: m & 8 != 0,
                motion_comp: m & 4 != 0,
                gsi: m & 2 != 0,
                merge: m & 1 != 0,
            })
            .collect()
    }

    /// `cfg` with these switches applied. Pruning keeps its configured place.
    pub fn apply(&self, cfg: &PipelineConfig) -> PipelineConfig {
        let mut out = cfg.clone();
        out.fullbox.enabled = self.fullbox;
        out.use_warps = self.motion_comp;
        let mut steps: Vec<Step> = cfg.postprocess.steps.clone();
        for s in [Step::Merge, Step::Interpolate, Step::Gsi, Step::Prune] {
            if !steps.contains(&s) {
                steps.push(s);
            }
        }
        steps.retain(|s| match s {
            Step::Merge => self.merge,
            Step::Interpolate | Step::Gsi => self.gsi,
            Step::Prune => cfg.postprocess.steps.contains(&Step::Prune),
        });
        out.postprocess.steps = steps;
        out
    }

    fn mark(on: bool) -> &'static str {
        if on {
            "x"
        } else {
            ""
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub components: Components,
    pub table: SceneTable,
}

/// Evaluates each component combination on every sequence.
pub fn run_ablation(seqs: &[LabelledSequence], cfg: &PipelineConfig, grid: &[Components]) -> Result<Vec<AblationRow>> {
    grid.iter()
        .map(|c| {
            let row_cfg = c.apply(cfg);
            let stats: Vec<Result<(SceneKind, SequenceStats)>> = seqs
                .par_iter()
                .map(|s| {
                    let pred = run_sequence(&s.input, &row_cfg)?;
                    Ok((s.input.meta.scene_kind, evaluate_sequence(&pred, &s.gt, &row_cfg.eval)))
                })
                .collect();
            let mut table = SceneTable::default();
            for r in stats {
                let (kind, s) = r?;
                table.add(kind, &s);
            }
            Ok(AblationRow { components: *c, table })
        })
        .collect()
}

/// Formats rows as a table with FB / MC / GSI / TM marks and HOTA, HOTA-S, HOTA-D.
pub fn format_ablation(rows: &[AblationRow], models: &str) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| format!("{:>8}", "-"), |v| format!("{:8.1}", 100.0 * v));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10}{:>4}{:>4}{:>5}{:>4}{:>8}{:>8}{:>8}{:>8}{:>8}",
        "Models", "FB", "MC", "GSI", "TM", "HOTA", "HOTA-S", "HOTA-D", "IDF1", "MOTA"
    );
    for r in rows {
        let c = r.components;
        let t = &r.table;
        let any = t.num_static + t.num_dynamic > 0;
        let _ = writeln!(
            out,
            "{:<10}{:>4}{:>4}{:>5}{:>4}{}{}{}{}{}",
            models,
            Components::mark(c.fullbox),
            Components::mark(c.motion_comp),
            Components::mark(c.gsi),
            Components::mark(c.merge),
            pct(any.then(|| t.all.hota.hota())),
            pct(t.hota_static()),
            pct(t.hota_dynamic()),
            pct(any.then(|| t.all.id.idf1())),
            pct(any.then(|| t.all.clear.mota())),
        );
    }
    out
}

impl From<&crate::sim::SimOutput> for LabelledSequence {
    fn from(s: &crate::sim::SimOutput) -> Self {
        LabelledSequence {
            input: SequenceInput {
                meta: s.meta.clone(),
                dets: s.dets.clone(),
                warps: (!s.warps.is_empty()).then(|| s.warps.clone()),
                height_samples: None,
            },
            gt: gt_rows(&s.gt),
        }
    }
}

/// Rejects sequences whose metadata cannot drive the tracker.
pub fn check_meta(meta: &SequenceMeta) -> Result<()> {
    if meta.is_valid() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sequence `{}` has invalid metadata", meta.name)))
    }
}
