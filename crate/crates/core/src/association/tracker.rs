use crate::error::{Error, Result};
use crate::geom::{iou, BBox, SceneKind, SequenceMeta, Trajectory};
use crate::motion::{KalmanFilter, KalmanState, WarpTable};
use crate::scalar::Scalar;

use super::lap::solve_assignment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    Tentative,
    Tracked,
    Lost,
    Removed,
}

#[derive(Debug, Clone)]
pub struct Track<T> {
    pub id: u64,
    pub state: TrackState,
    pub kalman: KalmanState<T>,
    pub history: Trajectory<T>,
    pub frames_lost: u32,
    pub last_score: T,
}

impl<T: Scalar> Track<T> {
    pub fn predicted_box(&self, frame: u32) -> BBox<T> {
        BBox::from_xyah(&self.kalman.measurement(), self.last_score, frame)
    }

    fn is_live(&self) -> bool {
        matches!(self.state, TrackState::Tracked | TrackState::Lost | TrackState::Tentative)
    }
}

/// Thresholds and switches of the association step.
///
/// `match_thresh_round1/2` are maximum assignment costs, with cost
/// `1 - similarity`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig<T> {
    pub high_thresh: T,
    pub low_thresh: T,
    pub new_track_thresh: T,
    pub match_thresh_round1: T,
    pub match_thresh_round2: T,
    pub track_buffer: u32,
    /// Multiply IoU by detection score in the first round.
    pub fuse_score: bool,
    pub border_margin: T,
    pub border_score_floor: T,
    pub nsa: bool,
    pub warps: Option<WarpTable<T>>,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        TrackerConfig {
            high_thresh: T::lit(0.6),
            low_thresh: T::lit(0.1),
            new_track_thresh: T::lit(0.7),
            match_thresh_round1: T::lit(0.8),
            match_thresh_round2: T::lit(0.5),
            track_buffer: 30,
            fuse_score: false,
            border_margin: T::lit(10.0),
            border_score_floor: T::lit(0.6),
            nsa: false,
            warps: None,
        }
    }
}

impl<T: Scalar> TrackerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !(self.low_thresh >= T::zero() && self.low_thresh < self.high_thresh && self.high_thresh <= T::one()) {
            return Err(Error::invalid(format!(
                "thresholds must satisfy 0 <= low ({}) < high ({}) <= 1",
                self.low_thresh, self.high_thresh
            )));
        }
        if self.track_buffer < 1 {
            return Err(Error::invalid("track_buffer must be at least 1"));
        }
        if !unit(self.new_track_thresh) || !unit(self.border_score_floor) {
            return Err(Error::invalid("new_track_thresh and border_score_floor must lie in [0, 1]"));
        }
        if self.border_margin < T::zero() {
            return Err(Error::invalid("border_margin must be nonnegative"));
        }
        Ok(())
    }
}

/// Raises the score of detections within `margin` pixels of an image border
/// to at least `floor`.
pub fn adjust_border_confidence<T: Scalar>(dets: &[BBox<T>], meta: &SequenceMeta, margin: T, floor: T) -> Vec<BBox<T>> {
    let w = T::lit(meta.width as f64);
    let h = T::lit(meta.height as f64);
    dets.iter()
        .map(|d| {
            let near = d.x <= margin || d.y <= margin || d.right() >= w - margin || d.bottom() >= h - margin;
            if near {
                d.with_score(d.score.max(floor))
            } else {
                *d
            }
        })
        .collect()
}

/// IoU between predicted track boxes (rows) and detections (columns),
/// optionally weighted by detection score. Row-major.
pub fn similarity_matrix<T: Scalar>(tracks: &[BBox<T>], dets: &[BBox<T>], fuse_score: bool) -> Vec<T> {
    let mut out = Vec::with_capacity(tracks.len() * dets.len());
    for t in tracks {
        for d in dets {
            let s = iou(t, d);
            out.push(if fuse_score { s * d.score } else { s });
        }
    }
    out
}

/// Single-sequence tracker state. Feed frames in strictly increasing order.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    filter: KalmanFilter<T>,
    tracks: Vec<Track<T>>,
    removed: Vec<Track<T>>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl<T: Scalar> Default for Tracker<T> {
    fn default() -> Self {
        Self::new(KalmanFilter::default())
    }
}

impl<T: Scalar> Tracker<T> {
    pub fn new(filter: KalmanFilter<T>) -> Self {
        Tracker {
            filter,
            tracks: Vec::new(),
            removed: Vec::new(),
            next_id: 1,
            last_frame: None,
        }
    }

    /// Tracks that are not yet removed.
    pub fn live_tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn removed_tracks(&self) -> &[Track<T>] {
        &self.removed
    }

    /// Processes one frame and returns `(id, box)` for every track matched or
    /// born on it, ordered by id. Emitted boxes are the associated detections.
    pub fn step(
        &mut self,
        frame: u32,
        dets: &[BBox<T>],
        cfg: &TrackerConfig<T>,
        meta: &SequenceMeta,
    ) -> Result<Vec<(u64, BBox<T>)>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::FrameOrder { last, got: frame });
            }
        }
        let first_pending = self.last_frame.map_or(frame, |l| l + 1);
        self.last_frame = Some(frame);

        if meta.scene_kind == SceneKind::Dynamic {
            if let Some(warps) = &cfg.warps {
                for f in first_pending..=frame {
                    let w = warps.get(f);
                    if w.is_identity() {
                        continue;
                    }
                    for t in &mut self.tracks {
                        t.kalman = w.apply(&t.kalman)?;
                    }
                }
            }
        }

        for t in &mut self.tracks {
            if t.state != TrackState::Tracked {
                t.kalman.mean[7] = T::zero();
            }
            t.kalman = self.filter.predict(&t.kalman);
        }

        let adjusted = adjust_border_confidence(dets, meta, cfg.border_margin, cfg.border_score_floor);
        let mut high = Vec::new();
        let mut low = Vec::new();
        for (k, d) in adjusted.iter().enumerate() {
            if d.score >= cfg.high_thresh {
                high.push(k);
            } else if d.score >= cfg.low_thresh {
                low.push(k);
            }
        }

        // round 1: tracked then lost tracks against high-score detections
        let mut pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].state == TrackState::Tracked)
            .collect();
        pool.extend((0..self.tracks.len()).filter(|&i| self.tracks[i].state == TrackState::Lost));

        let mut matched_det: Vec<Option<usize>> = vec![None; self.tracks.len()];
        let high_boxes: Vec<BBox<T>> = high.iter().map(|&k| adjusted[k]).collect();
        let pool_boxes: Vec<BBox<T>> = pool.iter().map(|&i| self.tracks[i].predicted_box(frame)).collect();
        let sim = similarity_matrix(&pool_boxes, &high_boxes, cfg.fuse_score);
        let cost: Vec<T> = sim.iter().map(|&s| T::one() - s).collect();
        let first = solve_assignment(&cost, pool.len(), high.len(), cfg.match_thresh_round1);
        for &(r, c) in &first.matches {
            matched_det[pool[r]] = Some(high[c]);
        }

        // round 2: still-unmatched tracked tracks against low-score detections
        let rest: Vec<usize> = first
            .unmatched_rows
            .iter()
            .map(|&r| pool[r])
            .filter(|&i| self.tracks[i].state == TrackState::Tracked)
            .collect();
        let low_boxes: Vec<BBox<T>> = low.iter().map(|&k| adjusted[k]).collect();
        let rest_boxes: Vec<BBox<T>> = rest.iter().map(|&i| self.tracks[i].predicted_box(frame)).collect();
        let sim = similarity_matrix(&rest_boxes, &low_boxes, false);
        let cost: Vec<T> = sim.iter().map(|&s| T::one() - s).collect();
        let second = solve_assignment(&cost, rest.len(), low.len(), cfg.match_thresh_round2);
        for &(r, c) in &second.matches {
            matched_det[rest[r]] = Some(low[c]);
        }

        let mut emitted = Vec::new();
        for (i, t) in self.tracks.iter_mut().enumerate() {
            match matched_det[i] {
                Some(k) => {
                    let det = &adjusted[k];
                    t.kalman = self.filter.update(&t.kalman, &det.to_xyah(), det.score, cfg.nsa)?;
                    t.state = TrackState::Tracked;
                    t.frames_lost = 0;
                    t.last_score = det.score;
                    let out = dets[k].with_frame(frame);
                    t.history.push(out);
                    emitted.push((t.id, out));
                }
                None => {
                    t.state = TrackState::Lost;
                    t.frames_lost += 1;
                    if t.frames_lost > cfg.track_buffer {
                        t.state = TrackState::Removed;
                    }
                }
            }
        }
        let (live, gone): (Vec<_>, Vec<_>) = std::mem::take(&mut self.tracks).into_iter().partition(|t| t.is_live());
        self.tracks = live;
        self.removed.extend(gone);

        for &c in &first.unmatched_cols {
            let k = high[c];
            let det = &adjusted[k];
            if det.score < cfg.new_track_thresh {
                continue;
            }
            let kalman = self.filter.initiate(&det.to_xyah())?;
            let id = self.next_id;
            self.next_id += 1;
            let out = dets[k].with_frame(frame);
            let mut history = Trajectory::new(id);
            history.push(out);
            self.tracks.push(Track {
                id,
                state: TrackState::Tracked,
                kalman,
                history,
                frames_lost: 0,
                last_score: det.score,
            });
            emitted.push((id, out));
        }
        emitted.sort_by_key(|(id, _)| *id);
        Ok(emitted)
    }

    /// Every track's emitted boxes, ordered by id; empty histories dropped.
    pub fn into_trajectories(self) -> Vec<Trajectory<T>> {
        let mut all: Vec<Trajectory<T>> = self
            .removed
            .into_iter()
            .chain(self.tracks)
            .map(|t| t.history)
            .filter(|h| !h.is_empty())
            .collect();
        all.sort_by_key(|t| t.id);
        all
    }
}
