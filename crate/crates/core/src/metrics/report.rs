use std::fmt;

use serde::{Deserialize, Serialize};

use super::clear::{clear_stats, id_stats, ClearStats, IdStats};
use super::hota::{hota_stats, HotaStats, NUM_ALPHAS};
use super::EvalData;
use crate::geom::{SceneKind, Trajectory};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Match threshold for CLEAR and IDF1.
    pub iou_thresh: f64,
    /// Ignore boxes created by interpolation or merging.
    pub exclude_synthetic: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_thresh: 0.5,
            exclude_synthetic: false,
        }
    }
}

/// Raw accumulators of one or more sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub clear: ClearStats,
    pub id: IdStats,
    pub hota: HotaStats,
    pub num_pred_ids: usize,
    pub num_gt_ids: usize,
}

impl SequenceStats {
    pub fn add(&mut self, o: &SequenceStats) {
        self.clear.add(&o.clear);
        self.id.add(&o.id);
        self.hota.add(&o.hota);
        self.num_pred_ids += o.num_pred_ids;
        self.num_gt_ids += o.num_gt_ids;
    }

    pub fn report(&self) -> EvalReport {
        EvalReport {
            map50: None,
            mota: self.clear.mota(),
            idf1: self.id.idf1(),
            hota: self.hota.hota(),
            deta: self.hota.deta(),
            assa: self.hota.assa(),
            idsw: self.clear.idsw,
            fp: self.clear.fp,
            fn_: self.clear.fn_,
            num_ids: self.num_pred_ids,
            hota_alpha: (0..NUM_ALPHAS).map(|a| self.hota.hota_at(a)).collect(),
            deta_alpha: (0..NUM_ALPHAS).map(|a| self.hota.deta_at(a)).collect(),
            assa_alpha: (0..NUM_ALPHAS).map(|a| self.hota.assa_at(a)).collect(),
        }
    }
}

/// Evaluate one sequence of predicted trajectories against ground truth.
pub fn evaluate<T: Scalar>(pred: &[Trajectory<T>], gt: &[Trajectory<T>], opts: &EvalOptions) -> SequenceStats {
    let data = EvalData::build(pred, gt, opts.exclude_synthetic);
    SequenceStats {
        clear: clear_stats(&data, opts.iou_thresh),
        id: id_stats(&data, opts.iou_thresh),
        hota: hota_stats(&data),
        num_pred_ids: data.num_pred_ids,
        num_gt_ids: data.num_gt_ids,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub map50: Option<f64>,
    pub mota: f64,
    pub idf1: f64,
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub idsw: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub num_ids: usize,
    pub hota_alpha: Vec<f64>,
    pub deta_alpha: Vec<f64>,
    pub assa_alpha: Vec<f64>,
}

impl EvalReport {
    pub const HEADER: &'static str = "   mAP50    MOTA    IDF1    HOTA    DetA    AssA   IDSW      FP      FN    IDs";
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: f64| format!("{:8.3}", 100.0 * v);
        write!(
            f,
            "{}{}{}{}{}{}{:7}{:8}{:8}{:7}",
            self.map50.map_or_else(|| format!("{:>8}", "-"), pct),
            pct(self.mota),
            pct(self.idf1),
            pct(self.hota),
            pct(self.deta),
            pct(self.assa),
            self.idsw,
            self.fp,
            self.fn_,
            self.num_ids
        )
    }
}

/// Accumulators split by scene kind, so results on static and moving-camera
/// sequences can be reported separately as well as combined.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneTable {
    pub all: SequenceStats,
    pub static_scenes: SequenceStats,
    pub dynamic_scenes: SequenceStats,
    pub num_static: usize,
    pub num_dynamic: usize,
}

impl SceneTable {
    pub fn add(&mut self, kind: SceneKind, s: &SequenceStats) {
        self.all.add(s);
        match kind {
            SceneKind::Static => {
                self.static_scenes.add(s);
                self.num_static += 1;
            }
            SceneKind::Dynamic => {
                self.dynamic_scenes.add(s);
                self.num_dynamic += 1;
            }
        }
    }

    pub fn hota_static(&self) -> Option<f64> {
        (self.num_static > 0).then(|| self.static_scenes.hota.hota())
    }

    pub fn hota_dynamic(&self) -> Option<f64> {
        (self.num_dynamic > 0).then(|| self.dynamic_scenes.hota.hota())
    }
}
