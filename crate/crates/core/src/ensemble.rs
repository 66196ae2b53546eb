//! Detection ensembling: Weighted Boxes Fusion, plus greedy NMS as the
//! suppression-based baseline.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geom::{iou, BBox};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct WbfParams<T> {
    pub iou_thresh: T,
    pub score_thresh: T,
    /// One weight per model; empty means equal weights of 1.
    pub weights: Vec<T>,
    /// Scale fused scores by `min(T, N) / N`, penalising boxes few models agree on.
    pub rescale: bool,
}

impl<T: Scalar> Default for WbfParams<T> {
    fn default() -> Self {
        WbfParams {
            iou_thresh: T::lit(0.55),
            score_thresh: T::lit(0.05),
            weights: Vec::new(),
            rescale: true,
        }
    }
}

struct Cluster<T> {
    members: Vec<(BBox<T>, T)>,
    fused: BBox<T>,
}

impl<T: Scalar> Cluster<T> {
    fn refuse(&mut self) {
        if let [(b, weighted)] = self.members[..] {
            self.fused = b.with_score(weighted);
            return;
        }
        let mut wsum = T::zero();
        let (mut x0, mut y0, mut x1, mut y1) = (T::zero(), T::zero(), T::zero(), T::zero());
        for (b, weighted) in &self.members {
            wsum += *weighted;
            x0 += *weighted * b.x;
            y0 += *weighted * b.y;
            x1 += *weighted * b.right();
            y1 += *weighted * b.bottom();
        }
        let n = T::lit(self.members.len() as f64);
        self.fused.x = x0 / wsum;
        self.fused.y = y0 / wsum;
        self.fused.w = x1 / wsum - self.fused.x;
        self.fused.h = y1 / wsum - self.fused.y;
        self.fused.score = wsum / n;
    }
}

fn by_score_desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Weighted Boxes Fusion of one frame's detections from several models.
///
/// Boxes are visited in descending `score * weight` and joined to the fused
/// box they overlap most (IoU at least `iou_thresh`), otherwise they open a
/// new cluster. Coordinates average corner positions weighted by
/// `score * weight`; the fused score is the mean weighted score, rescaled by
/// `min(T, N) / sum(weights)` where `T` is the cluster size and `N` the model count.
pub fn wbf<T: Scalar>(det_sets: &[Vec<BBox<T>>], params: &WbfParams<T>) -> Result<Vec<BBox<T>>> {
    let n_models = det_sets.len();
    let weights: Vec<T> = if params.weights.is_empty() {
        vec![T::one(); n_models]
    } else {
        params.weights.clone()
    };
    if weights.len() != n_models {
        return Err(Error::invalid(format!(
            "{} model weights for {n_models} detection sets",
            weights.len()
        )));
    }
    if weights.iter().any(|w| *w < T::zero() || !w.is_finite()) {
        return Err(Error::invalid("model weights must be finite and nonnegative"));
    }
    if !(params.iou_thresh > T::zero() && params.iou_thresh < T::one()) {
        return Err(Error::invalid("WBF iou_thresh must lie in (0, 1)"));
    }
    let weight_sum = weights.iter().fold(T::zero(), |a, &b| a + b);
    if n_models == 0 || weight_sum <= T::zero() {
        return Ok(Vec::new());
    }

    let mut all: Vec<(BBox<T>, T)> = det_sets
        .iter()
        .zip(&weights)
        .flat_map(|(set, &w)| set.iter().map(move |b| (*b, b.score * w)))
        .filter(|(_, ws)| *ws > T::zero())
        .collect();
    all.sort_by(|a, b| by_score_desc(a.1, b.1));

    let mut clusters: Vec<Cluster<T>> = Vec::new();
    for (b, ws) in all {
        let mut best: Option<(usize, T)> = None;
        for (k, c) in clusters.iter().enumerate() {
            let v = iou(&c.fused, &b);
            if v >= params.iou_thresh && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((k, v));
            }
        }
        match best {
            Some((k, _)) => {
                clusters[k].members.push((b, ws));
                clusters[k].refuse();
            }
            None => {
                let mut c = Cluster {
                    members: vec![(b, ws)],
                    fused: b,
                };
                c.refuse();
                clusters.push(c);
            }
        }
    }

    let n = T::lit(n_models as f64);
    let mut out: Vec<BBox<T>> = clusters
        .into_iter()
        .map(|c| {
            let mut f = c.fused;
            if params.rescale {
                let t = T::lit(c.members.len() as f64);
                f.score = f.score * t.min(n) / weight_sum;
            } else {
                f.score = f.score * n / weight_sum;
            }
            f.score = f.score.min(T::one());
            f
        })
        .filter(|b| b.score >= params.score_thresh)
        .collect();
    out.sort_by(|a, b| by_score_desc(a.score, b.score));
    Ok(out)
}

/// Greedy non-maximum suppression; equal scores keep input order.
pub fn nms<T: Scalar>(dets: &[BBox<T>], iou_thresh: T) -> Vec<BBox<T>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| by_score_desc(dets[a].score, dets[b].score));
    let mut kept: Vec<BBox<T>> = Vec::new();
    for i in order {
        if kept.iter().all(|k| iou(k, &dets[i]) < iou_thresh) {
            kept.push(dets[i]);
        }
    }
    kept
}
