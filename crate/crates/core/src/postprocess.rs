//! Offline trajectory repair: gap interpolation, Gaussian-process smoothing,
//! short-track pruning and motion-based merging of fragmented identities.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::{center_distance, BBox, SceneKind, SequenceMeta, Trajectory};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

fn lerp_box<T: Scalar>(a: &BBox<T>, b: &BBox<T>, frame: u32) -> BBox<T> {
    let span = T::lit((b.frame - a.frame) as f64);
    let t = T::lit((frame - a.frame) as f64) / span;
    let mix = |p: T, q: T| p + (q - p) * t;
    BBox::new(
        mix(a.x, b.x),
        mix(a.y, b.y),
        mix(a.w, b.w),
        mix(a.h, b.h),
        T::lit(0.5) * (a.score + b.score),
        frame,
    )
}

/// Fills every gap of at most `max_gap` missing frames by per-coordinate
/// linear interpolation between the flanking boxes.
pub fn linear_interpolate<T: Scalar>(t: &Trajectory<T>, max_gap: u32) -> Trajectory<T> {
    let mut out = t.clone();
    let frames: Vec<u32> = t.boxes.keys().copied().collect();
    for pair in frames.windows(2) {
        let (e, s) = (pair[0], pair[1]);
        let missing = s - e - 1;
        if missing == 0 || missing > max_gap {
            continue;
        }
        let (a, b) = (&t.boxes[&e], &t.boxes[&s]);
        for f in (e + 1)..s {
            out.push_synthetic(lerp_box(a, b, f));
        }
    }
    out
}

/// Gaussian-process posterior mean of `values` observed at `times`,
/// evaluated at `queries`.
///
/// The prior mean is the least-squares line through the data; the GP with
/// squared-exponential kernel of length `tau` and noise variance `noise`
/// models the residual around it.
pub(crate) struct GpSmoother<T> {
    times: Vec<T>,
    tau: T,
    chol: crate::linalg::Cholesky<T>,
    t_mean: T,
}

impl<T: Scalar> GpSmoother<T> {
    pub(crate) fn new(times: &[T], tau: T, noise: T) -> Result<Self> {
        let n = times.len();
        let t_mean = times.iter().fold(T::zero(), |a, &b| a + b) / T::lit(n as f64);
        let kernel = |a: T, b: T| (-(a - b) * (a - b) / (T::lit(2.0) * tau * tau)).exp();
        let mut jitter = T::zero();
        let mut last_err = None;
        for attempt in 0..4 {
            let k = SquareMatrix::from_fn(n, |i, j| {
                let v = kernel(times[i], times[j]);
                if i == j {
                    v + noise + jitter
                } else {
                    v
                }
            });
            match k.cholesky() {
                Ok(chol) => {
                    return Ok(GpSmoother {
                        times: times.to_vec(),
                        tau,
                        chol,
                        t_mean,
                    })
                }
                Err(e) => {
                    log::debug!("GP kernel factorisation failed (attempt {attempt}): {e}");
                    last_err = Some(e);
                    jitter = if jitter == T::zero() { T::lit(1e-8) } else { jitter * T::lit(100.0) };
                }
            }
        }
        Err(Error::Numerical(format!(
            "GP kernel matrix singular after regularisation: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        )))
    }

    pub(crate) fn smooth(&self, values: &[T], queries: &[T]) -> Vec<T> {
        let n = self.times.len();
        let v_mean = values.iter().fold(T::zero(), |a, &b| a + b) / T::lit(n as f64);
        let mut stt = T::zero();
        let mut stv = T::zero();
        for (&t, &v) in self.times.iter().zip(values) {
            stt += (t - self.t_mean) * (t - self.t_mean);
            stv += (t - self.t_mean) * (v - v_mean);
        }
        let slope = if stt > T::zero() { stv / stt } else { T::zero() };
        let trend = |t: T| v_mean + slope * (t - self.t_mean);

        let residual: Vec<T> = self.times.iter().zip(values).map(|(&t, &v)| v - trend(t)).collect();
        let alpha = self.chol.solve(&residual);
        let two_tau2 = T::lit(2.0) * self.tau * self.tau;
        queries
            .iter()
            .map(|&q| {
                let k = self
                    .times
                    .iter()
                    .zip(&alpha)
                    .fold(T::zero(), |acc, (&t, &a)| acc + a * (-(q - t) * (q - t) / two_tau2).exp());
                trend(q) + k
            })
            .collect()
    }
}

/// Gaussian-smoothed interpolation: GP regression of each box coordinate on
/// frame index, evaluated on every frame from the first to the last.
pub fn gsi_smooth<T: Scalar>(t: &Trajectory<T>, tau: T, noise: T) -> Result<Trajectory<T>> {
    if t.is_empty() {
        return Err(Error::invalid("cannot smooth an empty trajectory"));
    }
    if !(tau > T::zero()) || noise < T::zero() {
        return Err(Error::invalid("GSI needs tau > 0 and noise >= 0"));
    }
    let (first, last) = (t.first_frame().unwrap(), t.last_frame().unwrap());
    let times: Vec<T> = t.boxes.keys().map(|&f| T::lit(f as f64)).collect();
    let queries: Vec<T> = (first..=last).map(|f| T::lit(f as f64)).collect();
    let gp = GpSmoother::new(&times, tau, noise)?;
    let column = |pick: fn(&BBox<T>) -> T| -> Vec<T> { t.boxes.values().map(pick).collect() };
    let xs = gp.smooth(&column(|b| b.x), &queries);
    let ys = gp.smooth(&column(|b| b.y), &queries);
    let ws = gp.smooth(&column(|b| b.w), &queries);
    let hs = gp.smooth(&column(|b| b.h), &queries);

    let min_side = T::lit(1e-3);
    let mut out = Trajectory::new(t.id);
    let observed: Vec<(u32, BBox<T>)> = t.boxes.iter().map(|(f, b)| (*f, *b)).collect();
    let mut cursor = 0usize;
    for (k, f) in (first..=last).enumerate() {
        while cursor + 1 < observed.len() && observed[cursor + 1].0 <= f {
            cursor += 1;
        }
        let score = match t.boxes.get(&f) {
            Some(b) => b.score,
            None => T::lit(0.5) * (observed[cursor].1.score + observed[(cursor + 1).min(observed.len() - 1)].1.score),
        };
        let b = BBox::new(xs[k], ys[k], ws[k].max(min_side), hs[k].max(min_side), score, f);
        if t.boxes.contains_key(&f) && !t.is_synthetic(f) {
            out.push(b);
        } else {
            out.push_synthetic(b);
        }
    }
    Ok(out)
}

/// GSI applied separately to each run of the trajectory whose internal gaps
/// are at most `max_gap` frames; longer gaps stay empty.
pub fn gsi_smooth_segments<T: Scalar>(t: &Trajectory<T>, tau: T, noise: T, max_gap: u32) -> Result<Trajectory<T>> {
    let mut out = Trajectory::new(t.id);
    let mut segment = Trajectory::new(t.id);
    let mut prev: Option<u32> = None;
    let flush = |seg: &mut Trajectory<T>, out: &mut Trajectory<T>| -> Result<()> {
        if !seg.is_empty() {
            let s = gsi_smooth(seg, tau, noise)?;
            for (f, b) in s.boxes {
                if s.synthetic.contains(&f) {
                    out.push_synthetic(b);
                } else {
                    out.push(b);
                }
            }
        }
        *seg = Trajectory::new(seg.id);
        Ok(())
    };
    for (&f, b) in &t.boxes {
        if let Some(p) = prev {
            if f - p - 1 > max_gap {
                flush(&mut segment, &mut out)?;
            }
        }
        if t.is_synthetic(f) {
            segment.push_synthetic(*b);
        } else {
            segment.push(*b);
        }
        prev = Some(f);
    }
    flush(&mut segment, &mut out)?;
    Ok(out)
}

/// Drops trajectories with fewer than `min_len` observed boxes.
pub fn prune_short<T: Scalar>(tracks: Vec<Trajectory<T>>, min_len: usize) -> Vec<Trajectory<T>> {
    tracks.into_iter().filter(|t| t.observed_len() >= min_len).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeParams<T> {
    /// Largest number of frames between a track's end and a candidate's start.
    pub max_gap: u32,
    /// Fixed center-distance gate in pixels; when `None` the gate is
    /// `dist_height_factor` times the lost track's mean box height.
    pub dist_thresh: Option<T>,
    pub dist_height_factor: T,
    /// Allowed box-area ratio between the lost track's last box and the candidate's first.
    pub area_ratio: T,
    /// Number of trailing observed boxes used to estimate velocity.
    pub velocity_window: usize,
}

impl<T: Scalar> Default for MergeParams<T> {
    fn default() -> Self {
        MergeParams {
            max_gap: 90,
            dist_thresh: None,
            dist_height_factor: T::lit(0.5),
            area_ratio: T::lit(1.6),
            velocity_window: 10,
        }
    }
}

fn trailing_velocity<T: Scalar>(t: &Trajectory<T>, window: usize) -> (T, T) {
    let tail: Vec<&BBox<T>> = t.observed().collect();
    let tail = &tail[tail.len().saturating_sub(window.max(1))..];
    match (tail.first(), tail.last()) {
        (Some(a), Some(b)) if b.frame > a.frame => {
            let dt = T::lit((b.frame - a.frame) as f64);
            let (ax, ay) = a.center();
            let (bx, by) = b.center();
            ((bx - ax) / dt, (by - ay) / dt)
        }
        _ => (T::zero(), T::zero()),
    }
}

/// Links tracks that end to tracks starting shortly after, near the lost
/// track's velocity-extrapolated position and with a similar box area.
///
/// Candidate links are taken greedily by ascending gap, then distance; each
/// track keeps at most one successor and one predecessor, and chains merge
/// transitively under the earliest track's id. Frames between linked
/// segments are filled by linear interpolation.
pub fn merge_tracks<T: Scalar>(
    tracks: &[Trajectory<T>],
    meta: &SequenceMeta,
    params: &MergeParams<T>,
) -> Result<Vec<Trajectory<T>>> {
    if meta.scene_kind == SceneKind::Dynamic {
        return Err(Error::DynamicScene(meta.name.clone()));
    }
    if !(params.area_ratio >= T::one()) || params.max_gap == 0 {
        return Err(Error::invalid("merge needs area_ratio >= 1 and max_gap >= 1"));
    }
    let tracks: Vec<&Trajectory<T>> = tracks.iter().filter(|t| !t.is_empty()).collect();

    struct Link<T> {
        gap: u32,
        dist: T,
        from: usize,
        to: usize,
    }
    let mut links = Vec::new();
    for (i, lost) in tracks.iter().enumerate() {
        let end = lost.last().unwrap();
        let (vx, vy) = trailing_velocity(lost, params.velocity_window);
        let mean_h = lost.boxes.values().fold(T::zero(), |a, b| a + b.h) / T::lit(lost.len() as f64);
        let gate = params.dist_thresh.unwrap_or(params.dist_height_factor * mean_h);
        for (j, cand) in tracks.iter().enumerate() {
            let start = cand.first().unwrap();
            if i == j || start.frame <= end.frame || start.frame - end.frame > params.max_gap {
                continue;
            }
            let dt = T::lit((start.frame - end.frame) as f64);
            let predicted = BBox {
                x: end.x + vx * dt,
                y: end.y + vy * dt,
                ..*end
            };
            let dist = center_distance(&predicted, start);
            let ratio = start.area() / end.area();
            if dist <= gate && ratio <= params.area_ratio && ratio * params.area_ratio >= T::one() {
                links.push(Link {
                    gap: start.frame - end.frame,
                    dist,
                    from: i,
                    to: j,
                });
            }
        }
    }
    links.sort_by(|a, b| {
        a.gap
            .cmp(&b.gap)
            .then(a.dist.partial_cmp(&b.dist).unwrap_or(Ordering::Equal))
            .then(a.from.cmp(&b.from))
            .then(a.to.cmp(&b.to))
    });

    let mut next: Vec<Option<usize>> = vec![None; tracks.len()];
    let mut prev: Vec<Option<usize>> = vec![None; tracks.len()];
    for l in &links {
        if next[l.from].is_none() && prev[l.to].is_none() {
            next[l.from] = Some(l.to);
            prev[l.to] = Some(l.from);
        }
    }

    let mut merged = Vec::new();
    for head in (0..tracks.len()).filter(|&i| prev[i].is_none()) {
        let mut out = tracks[head].clone();
        let mut cur = head;
        while let Some(n) = next[cur] {
            let end = *tracks[cur].last().unwrap();
            let start = *tracks[n].first().unwrap();
            for f in (end.frame + 1)..start.frame {
                out.push_synthetic(lerp_box(&end, &start, f));
            }
            for (&f, b) in &tracks[n].boxes {
                if tracks[n].is_synthetic(f) {
                    out.push_synthetic(*b);
                } else {
                    out.push(*b);
                }
            }
            cur = n;
        }
        merged.push(out);
    }
    merged.sort_by_key(|t| t.id);
    Ok(merged)
}

/// Post-processing step names, in the order they are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Merge,
    Interpolate,
    Gsi,
    Prune,
}

impl std::str::FromStr for Step {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "merge" => Ok(Step::Merge),
            "interpolate" | "interp" | "linear" => Ok(Step::Interpolate),
            "gsi" => Ok(Step::Gsi),
            "prune" => Ok(Step::Prune),
            other => Err(format!("unknown post-processing step `{other}`")),
        }
    }
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Step::Merge => "merge",
            Step::Interpolate => "interpolate",
            Step::Gsi => "gsi",
            Step::Prune => "prune",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessParams<T> {
    pub steps: Vec<Step>,
    pub max_gap: u32,
    pub gsi_tau: T,
    pub gsi_noise: T,
    pub min_len: usize,
    pub merge: MergeParams<T>,
}

impl<T: Scalar> Default for PostprocessParams<T> {
    fn default() -> Self {
        PostprocessParams {
            steps: vec![Step::Merge, Step::Interpolate, Step::Gsi, Step::Prune],
            max_gap: 30,
            gsi_tau: T::lit(10.0),
            gsi_noise: T::lit(1e-2),
            min_len: 10,
            merge: MergeParams::default(),
        }
    }
}

/// Runs the configured steps in order. Merging is skipped on dynamic scenes.
pub fn run_steps<T: Scalar>(
    tracks: Vec<Trajectory<T>>,
    meta: &SequenceMeta,
    params: &PostprocessParams<T>,
) -> Result<Vec<Trajectory<T>>> {
    let mut tracks = tracks;
    for step in &params.steps {
        tracks = match step {
            Step::Merge => {
                if meta.scene_kind == SceneKind::Dynamic {
                    log::debug!("{}: skipping track merge on dynamic scene", meta.name);
                    tracks
                } else {
                    merge_tracks(&tracks, meta, &params.merge)?
                }
            }
            Step::Interpolate => tracks.iter().map(|t| linear_interpolate(t, params.max_gap)).collect(),
            Step::Gsi => tracks
                .iter()
                .map(|t| gsi_smooth_segments(t, params.gsi_tau, params.gsi_noise, params.max_gap))
                .collect::<Result<_>>()?,
            Step::Prune => prune_short(tracks, params.min_len),
        };
    }
    Ok(tracks)
}

/// Groups boxes by frame: `frame -> [(id, box)]`.
pub fn by_frame<T: Scalar>(tracks: &[Trajectory<T>]) -> BTreeMap<u32, Vec<(u64, BBox<T>)>> {
    let mut out: BTreeMap<u32, Vec<(u64, BBox<T>)>> = BTreeMap::new();
    for t in tracks {
        for (&f, b) in &t.boxes {
            out.entry(f).or_default().push((t.id, *b));
        }
    }
    for v in out.values_mut() {
        v.sort_by_key(|(id, _)| *id);
    }
    out
}
