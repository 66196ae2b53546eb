use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::{iou, BBox};
use crate::scalar::Scalar;

/// Average precision at `iou_thresh`, all-point interpolated.
///
/// Detections are visited in descending score and each claims the unclaimed
/// ground-truth box it overlaps most. Tied scores form one operating point,
/// so the result does not depend on how frames are ordered.
pub fn average_precision<T: Scalar>(
    dets: &BTreeMap<u32, Vec<BBox<T>>>,
    gts: &BTreeMap<u32, Vec<BBox<T>>>,
    iou_thresh: T,
) -> Result<f64> {
    let total_gt: usize = gts.values().map(|v| v.len()).sum();
    if total_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut ranked: Vec<(T, u32, usize)> = dets
        .iter()
        .flat_map(|(&f, v)| v.iter().enumerate().map(move |(k, d)| (d.score, f, k)))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut claimed: BTreeMap<u32, Vec<bool>> = gts.iter().map(|(&f, v)| (f, vec![false; v.len()])).collect();
    let mut tp_flags = Vec::with_capacity(ranked.len());
    let scores: Vec<T> = ranked.iter().map(|r| r.0).collect();
    for (_, f, k) in ranked {
        let d = &dets[&f][k];
        let mut best: Option<(usize, T)> = None;
        if let (Some(frame_gt), Some(used)) = (gts.get(&f), claimed.get(&f)) {
            for (g, gb) in frame_gt.iter().enumerate() {
                if used[g] {
                    continue;
                }
                let v = iou(d, gb);
                if v >= iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
        }
        match best {
            Some((g, _)) => {
                claimed.get_mut(&f).unwrap()[g] = true;
                tp_flags.push(true);
            }
            None => tp_flags.push(false),
        }
    }

    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut precision = Vec::with_capacity(tp_flags.len());
    let mut tp = 0usize;
    for (k, &hit) in tp_flags.iter().enumerate() {
        if hit {
            tp += 1;
        }
        if k + 1 == scores.len() || scores[k + 1] != scores[k] {
            recall.push(tp as f64 / total_gt as f64);
            precision.push(tp as f64 / (k + 1) as f64);
        }
    }
    // precision envelope, then area under the step curve
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Ok(ap)
}
