//! Detection and tracking evaluation: AP@0.5, CLEAR MOT, IDF1 and HOTA.
//!
//! Tracking metrics follow the MOTChallenge reference evaluator: CLEAR
//! matching prefers to keep the previous frame's pairs, IDF1 uses one global
//! identity matching, and HOTA matches each frame once by alignment-weighted
//! IoU and then thresholds that matching at every alpha.

mod ap;
mod clear;
mod hota;
mod mot17;
mod report;

use std::collections::{BTreeMap, BTreeSet};

pub use ap::average_precision;
pub use clear::{clear_idf1, ClearStats, IdStats};
pub use hota::{hota, HotaStats, ALPHAS};
pub use mot17::{filter_mot17, GtBox, DISTRACTOR_CLASSES, PEDESTRIAN_CLASS};
pub use report::{evaluate, EvalOptions, EvalReport, SceneTable, SequenceStats};

use crate::association::solve_assignment;
use crate::geom::{iou, BBox, Trajectory};
use crate::scalar::Scalar;

/// One frame of an evaluation problem with identities mapped to dense indices.
#[derive(Debug, Clone, Default)]
pub(crate) struct FrameData {
    pub gt: Vec<usize>,
    pub pred: Vec<usize>,
    /// Row-major IoU, `gt.len()` rows by `pred.len()` columns.
    pub sim: Vec<f64>,
}

impl FrameData {
    #[inline]
    pub fn sim(&self, g: usize, p: usize) -> f64 {
        self.sim[g * self.pred.len() + p]
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EvalData {
    pub frames: Vec<FrameData>,
    pub num_gt_ids: usize,
    pub num_pred_ids: usize,
    pub num_gt_dets: usize,
    pub num_pred_dets: usize,
}

fn to_f64<T: Scalar>(b: &BBox<T>) -> BBox<f64> {
    BBox::new(
        b.x.to_f64_lossy(),
        b.y.to_f64_lossy(),
        b.w.to_f64_lossy(),
        b.h.to_f64_lossy(),
        b.score.to_f64_lossy(),
        b.frame,
    )
}

/// Dense-index boxes of one side of a frame.
type IndexedBoxes = Vec<(usize, BBox<f64>)>;

impl EvalData {
    pub fn build<T: Scalar>(pred: &[Trajectory<T>], gt: &[Trajectory<T>], exclude_synthetic: bool) -> Self {
        let gt_ids: BTreeMap<u64, usize> = collect_ids(gt);
        let pred_ids: BTreeMap<u64, usize> = collect_ids(pred);
        let mut per_frame: BTreeMap<u32, (IndexedBoxes, IndexedBoxes)> = BTreeMap::new();
        for t in gt {
            for (&f, b) in &t.boxes {
                per_frame.entry(f).or_default().0.push((gt_ids[&t.id], to_f64(b)));
            }
        }
        for t in pred {
            for (&f, b) in &t.boxes {
                if exclude_synthetic && t.is_synthetic(f) {
                    continue;
                }
                per_frame.entry(f).or_default().1.push((pred_ids[&t.id], to_f64(b)));
            }
        }
        let mut data = EvalData {
            num_gt_ids: gt_ids.len(),
            num_pred_ids: pred_ids.len(),
            ..Default::default()
        };
        for (_, (mut g, mut p)) in per_frame {
            g.sort_by_key(|(i, _)| *i);
            p.sort_by_key(|(i, _)| *i);
            data.num_gt_dets += g.len();
            data.num_pred_dets += p.len();
            let mut sim = Vec::with_capacity(g.len() * p.len());
            for (_, gb) in &g {
                for (_, pb) in &p {
                    sim.push(iou(gb, pb));
                }
            }
            data.frames.push(FrameData {
                gt: g.into_iter().map(|(i, _)| i).collect(),
                pred: p.into_iter().map(|(i, _)| i).collect(),
                sim,
            });
        }
        data
    }
}

fn collect_ids<T: Scalar>(tracks: &[Trajectory<T>]) -> BTreeMap<u64, usize> {
    let ids: BTreeSet<u64> = tracks.iter().filter(|t| !t.is_empty()).map(|t| t.id).collect();
    ids.into_iter().enumerate().map(|(k, id)| (id, k)).collect()
}

/// Maximum-total-score matching over pairs with positive score.
pub(crate) fn max_score_matching(score: &[f64], rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let cost: Vec<f64> = score.iter().map(|&s| if s > 0.0 { -s } else { 1.0 }).collect();
    solve_assignment(&cost, rows, cols, 0.0).matches
}
