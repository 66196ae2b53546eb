use std::collections::BTreeMap;

use super::max_score_matching;
use crate::geom::{iou, BBox, Trajectory};

pub const PEDESTRIAN_CLASS: i32 = 1;
/// person on vehicle, static person, distractor, reflection
pub const DISTRACTOR_CLASSES: [i32; 4] = [2, 7, 8, 12];

/// One annotated box of a MOT17-style ground-truth file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub id: u64,
    pub bbox: BBox<f64>,
    pub consider: bool,
    pub class: i32,
    pub visibility: f64,
}

/// Standard MOT17 evaluation preprocessing.
///
/// Per frame, predictions matched (IoU >= 0.5) to distractor annotations are
/// dropped; then only considered pedestrian annotations with visibility at
/// least `vis_thresh` are kept as ground truth.
pub fn filter_mot17(
    gt: &[GtBox],
    pred: &[Trajectory<f64>],
    vis_thresh: f64,
) -> (Vec<Trajectory<f64>>, Vec<Trajectory<f64>>) {
    let mut gt_by_frame: BTreeMap<u32, Vec<&GtBox>> = BTreeMap::new();
    for g in gt {
        gt_by_frame.entry(g.bbox.frame).or_default().push(g);
    }
    let mut pred_out: Vec<Trajectory<f64>> = pred.iter().map(|t| Trajectory::new(t.id)).collect();
    let mut pred_by_frame: BTreeMap<u32, Vec<(usize, &BBox<f64>)>> = BTreeMap::new();
    for (k, t) in pred.iter().enumerate() {
        for (&f, b) in &t.boxes {
            pred_by_frame.entry(f).or_default().push((k, b));
        }
    }
    for (f, preds) in &pred_by_frame {
        let gts = gt_by_frame.get(f).map(|v| v.as_slice()).unwrap_or(&[]);
        let (n, m) = (gts.len(), preds.len());
        let mut drop = vec![false; m];
        if n > 0 {
            let mut score = vec![0.0; n * m];
            for (r, g) in gts.iter().enumerate() {
                for (c, (_, p)) in preds.iter().enumerate() {
                    let v = iou(&g.bbox, *p);
                    if v >= 0.5 - f64::EPSILON {
                        score[r * m + c] = v;
                    }
                }
            }
            for (r, c) in max_score_matching(&score, n, m) {
                if DISTRACTOR_CLASSES.contains(&gts[r].class) {
                    drop[c] = true;
                }
            }
        }
        for (c, (k, b)) in preds.iter().enumerate() {
            if drop[c] {
                continue;
            }
            let t = &pred[*k];
            if t.is_synthetic(*f) {
                pred_out[*k].push_synthetic(**b);
            } else {
                pred_out[*k].push(**b);
            }
        }
    }
    pred_out.retain(|t| !t.is_empty());

    let mut gt_tracks: BTreeMap<u64, Trajectory<f64>> = BTreeMap::new();
    for g in gt {
        if g.consider && g.class == PEDESTRIAN_CLASS && g.visibility >= vis_thresh {
            gt_tracks.entry(g.id).or_insert_with(|| Trajectory::new(g.id)).push(g.bbox);
        }
    }
    (gt_tracks.into_values().collect(), pred_out)
}
