use serde::{Deserialize, Serialize};

use super::{max_score_matching, EvalData};
use crate::geom::Trajectory;
use crate::scalar::Scalar;

pub const NUM_ALPHAS: usize = 19;

/// Localisation thresholds 0.05, 0.10, ..., 0.95.
pub const ALPHAS: [f64; NUM_ALPHAS] = {
    let mut a = [0.0; NUM_ALPHAS];
    let mut k = 0;
    while k < NUM_ALPHAS {
        a[k] = 0.05 * (k + 1) as f64;
        k += 1;
    }
    a
};

/// Raw per-alpha HOTA accumulators. Summing two of these is the same as
/// evaluating the concatenated sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotaStats {
    pub tp: [usize; NUM_ALPHAS],
    pub fn_: [usize; NUM_ALPHAS],
    pub fp: [usize; NUM_ALPHAS],
    /// Sum over true positives of their association accuracy.
    pub assa_sum: [f64; NUM_ALPHAS],
    pub loca_sum: [f64; NUM_ALPHAS],
}

impl Default for HotaStats {
    fn default() -> Self {
        HotaStats {
            tp: [0; NUM_ALPHAS],
            fn_: [0; NUM_ALPHAS],
            fp: [0; NUM_ALPHAS],
            assa_sum: [0.0; NUM_ALPHAS],
            loca_sum: [0.0; NUM_ALPHAS],
        }
    }
}

impl HotaStats {
    pub fn add(&mut self, o: &HotaStats) {
        for a in 0..NUM_ALPHAS {
            self.tp[a] += o.tp[a];
            self.fn_[a] += o.fn_[a];
            self.fp[a] += o.fp[a];
            self.assa_sum[a] += o.assa_sum[a];
            self.loca_sum[a] += o.loca_sum[a];
        }
    }

    pub fn deta_at(&self, a: usize) -> f64 {
        self.tp[a] as f64 / (self.tp[a] + self.fn_[a] + self.fp[a]).max(1) as f64
    }

    pub fn assa_at(&self, a: usize) -> f64 {
        self.assa_sum[a] / self.tp[a].max(1) as f64
    }

    pub fn hota_at(&self, a: usize) -> f64 {
        (self.deta_at(a) * self.assa_at(a)).sqrt()
    }

    pub fn deta(&self) -> f64 {
        mean((0..NUM_ALPHAS).map(|a| self.deta_at(a)))
    }

    pub fn assa(&self) -> f64 {
        mean((0..NUM_ALPHAS).map(|a| self.assa_at(a)))
    }

    pub fn hota(&self) -> f64 {
        mean((0..NUM_ALPHAS).map(|a| self.hota_at(a)))
    }

    pub fn loca(&self) -> f64 {
        mean((0..NUM_ALPHAS).map(|a| self.loca_sum[a].max(1e-10) / (self.tp[a] as f64).max(1e-10)))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    it.sum::<f64>() / NUM_ALPHAS as f64
}

pub(crate) fn hota_stats(data: &EvalData) -> HotaStats {
    let (ng, np) = (data.num_gt_ids, data.num_pred_ids);
    let mut gt_count = vec![0usize; ng];
    let mut pred_count = vec![0usize; np];
    let mut potential = vec![0.0; ng * np];
    for f in &data.frames {
        let m = f.pred.len();
        let row_sum: Vec<f64> = (0..f.gt.len()).map(|r| (0..m).map(|c| f.sim(r, c)).sum()).collect();
        let col_sum: Vec<f64> = (0..m).map(|c| (0..f.gt.len()).map(|r| f.sim(r, c)).sum()).collect();
        for (r, &g) in f.gt.iter().enumerate() {
            for (c, &p) in f.pred.iter().enumerate() {
                let s = f.sim(r, c);
                let denom = row_sum[r] + col_sum[c] - s;
                if denom > f64::EPSILON {
                    potential[g * np + p] += s / denom;
                }
            }
        }
        for &g in &f.gt {
            gt_count[g] += 1;
        }
        for &p in &f.pred {
            pred_count[p] += 1;
        }
    }
    let mut alignment = vec![0.0; ng * np];
    for g in 0..ng {
        for p in 0..np {
            let k = g * np + p;
            let denom = gt_count[g] as f64 + pred_count[p] as f64 - potential[k];
            if denom > 0.0 {
                alignment[k] = potential[k] / denom;
            }
        }
    }

    let mut s = HotaStats::default();
    let mut matches = vec![vec![0usize; ng * np]; NUM_ALPHAS];
    for f in &data.frames {
        let (n, m) = (f.gt.len(), f.pred.len());
        if n == 0 || m == 0 {
            for a in 0..NUM_ALPHAS {
                s.fp[a] += m;
                s.fn_[a] += n;
            }
            continue;
        }
        let mut score = vec![0.0; n * m];
        for (r, &g) in f.gt.iter().enumerate() {
            for (c, &p) in f.pred.iter().enumerate() {
                score[r * m + c] = alignment[g * np + p] * f.sim(r, c);
            }
        }
        let pairs = max_score_matching(&score, n, m);
        for (a, &alpha) in ALPHAS.iter().enumerate() {
            let mut hits = 0;
            for &(r, c) in &pairs {
                let v = f.sim(r, c);
                if v >= alpha - f64::EPSILON {
                    hits += 1;
                    s.loca_sum[a] += v;
                    matches[a][f.gt[r] * np + f.pred[c]] += 1;
                }
            }
            s.tp[a] += hits;
            s.fn_[a] += n - hits;
            s.fp[a] += m - hits;
        }
    }
    for (a, counts) in matches.iter().enumerate() {
        let mut sum = 0.0;
        for g in 0..ng {
            for p in 0..np {
                let c = counts[g * np + p];
                if c > 0 {
                    let denom = (gt_count[g] + pred_count[p] - c).max(1) as f64;
                    sum += c as f64 * c as f64 / denom;
                }
            }
        }
        s.assa_sum[a] = sum;
    }
    s
}

/// HOTA accumulators for one sequence.
pub fn hota<T: Scalar>(pred: &[Trajectory<T>], gt: &[Trajectory<T>]) -> HotaStats {
    hota_stats(&EvalData::build(pred, gt, false))
}
