use serde::{Deserialize, Serialize};

use super::{max_score_matching, EvalData};

/// Raw CLEAR MOT counts; sums across sequences combine exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearStats {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub idsw: usize,
    pub num_gt: usize,
}

impl ClearStats {
    pub fn mota(&self) -> f64 {
        (self.tp as f64 - self.fp as f64 - self.idsw as f64) / self.num_gt.max(1) as f64
    }

    pub fn add(&mut self, o: &ClearStats) {
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.fp += o.fp;
        self.idsw += o.idsw;
        self.num_gt += o.num_gt;
    }
}

/// Raw identity counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdStats {
    pub idtp: usize,
    pub idfn: usize,
    pub idfp: usize,
}

impl IdStats {
    pub fn idf1(&self) -> f64 {
        self.idtp as f64 / (self.idtp as f64 + 0.5 * self.idfp as f64 + 0.5 * self.idfn as f64).max(1.0)
    }

    pub fn add(&mut self, o: &IdStats) {
        self.idtp += o.idtp;
        self.idfn += o.idfn;
        self.idfp += o.idfp;
    }
}

pub(crate) fn clear_stats(data: &EvalData, thresh: f64) -> ClearStats {
    let mut s = ClearStats {
        num_gt: data.num_gt_dets,
        ..Default::default()
    };
    // last pred matched to each gt ever, and in the previous non-empty frame
    let mut prev_id: Vec<Option<usize>> = vec![None; data.num_gt_ids];
    let mut prev_step: Vec<Option<usize>> = vec![None; data.num_gt_ids];
    for f in &data.frames {
        if f.gt.is_empty() {
            s.fp += f.pred.len();
            continue;
        }
        if f.pred.is_empty() {
            s.fn_ += f.gt.len();
            continue;
        }
        let (n, m) = (f.gt.len(), f.pred.len());
        let mut score = vec![0.0; n * m];
        for (r, &g) in f.gt.iter().enumerate() {
            for (c, &p) in f.pred.iter().enumerate() {
                let v = f.sim(r, c);
                if v >= thresh - f64::EPSILON {
                    let carry = if prev_step[g] == Some(p) { 1000.0 } else { 0.0 };
                    score[r * m + c] = carry + v;
                }
            }
        }
        let matches = max_score_matching(&score, n, m);
        for step in prev_step.iter_mut() {
            *step = None;
        }
        for &(r, c) in &matches {
            let (g, p) = (f.gt[r], f.pred[c]);
            if prev_id[g].is_some_and(|q| q != p) {
                s.idsw += 1;
            }
            prev_id[g] = Some(p);
            prev_step[g] = Some(p);
        }
        s.tp += matches.len();
        s.fn_ += n - matches.len();
        s.fp += m - matches.len();
    }
    s
}

pub(crate) fn id_stats(data: &EvalData, thresh: f64) -> IdStats {
    let (ng, np) = (data.num_gt_ids, data.num_pred_ids);
    let mut overlap = vec![0usize; ng * np];
    for f in &data.frames {
        for (r, &g) in f.gt.iter().enumerate() {
            for (c, &p) in f.pred.iter().enumerate() {
                if f.sim(r, c) >= thresh {
                    overlap[g * np + p] += 1;
                }
            }
        }
    }
    let score: Vec<f64> = overlap.iter().map(|&c| c as f64).collect();
    let idtp: usize = max_score_matching(&score, ng, np)
        .into_iter()
        .map(|(g, p)| overlap[g * np + p])
        .sum();
    IdStats {
        idtp,
        idfn: data.num_gt_dets - idtp,
        idfp: data.num_pred_dets - idtp,
    }
}

/// CLEAR MOT and identity counts for one sequence.
pub fn clear_idf1<T: crate::scalar::Scalar>(
    pred: &[crate::geom::Trajectory<T>],
    gt: &[crate::geom::Trajectory<T>],
    iou_thresh: f64,
) -> (ClearStats, IdStats) {
    let data = EvalData::build(pred, gt, false);
    (clear_stats(&data, iou_thresh), id_stats(&data, iou_thresh))
}
