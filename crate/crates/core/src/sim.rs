//! Synthetic pedestrian sequences with a configurable detector-noise model.
//!
//! People walk at constant velocity plus a small Gaussian random walk, with
//! box height linear in the bottom edge's image row. Detections are the
//! ground-truth boxes after dropout, jitter, optional occlusion gaps and
//! border clipping, plus uniform false positives. A panning camera shifts
//! everything in image space and the exact compensating warps are returned.
//! All emitted boxes are quantized to the MOT file precision, so writing and
//! re-reading a simulated sequence is lossless.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::geom::{iou, BBox, SceneKind, SequenceMeta, Trajectory};
use crate::moio::quantize_box;
use crate::motion::{WarpMatrix, WarpTable};

/// Forced detection gaps that fragment identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    /// Probability that a track receives one gap.
    pub prob: f64,
    pub min_len: u32,
    pub max_len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_tracks: usize,
    pub length: u32,
    pub width: u32,
    pub height: u32,
    /// Per-frame standard deviation of the position random walk, pixels.
    pub motion_noise: f64,
    /// Standard deviation of detection coordinate noise, pixels.
    pub jitter: f64,
    pub drop_prob: f64,
    /// Mean false positives per frame.
    pub fp_rate: f64,
    /// score = clamp(1 - beta * (1 - IoU) + N(0, score_noise))
    pub score_beta: f64,
    pub score_noise: f64,
    /// Beta distribution of false-positive scores.
    pub fp_score_shape: (f64, f64),
    pub clip_at_border: bool,
    /// Camera translation per frame, pixels.
    pub camera_pan: (f64, f64),
    /// Extra per-frame camera translation noise, pixels.
    pub camera_shake: f64,
    /// Height model h = a * y_bottom + b.
    pub height_model: (f64, f64),
    /// Range of the initial bottom edge as fractions of the image height.
    pub spawn_bottom: (f64, f64),
    pub max_speed: (f64, f64),
    pub min_track_len: u32,
    /// Boxes with a smaller visible fraction are not annotated.
    pub min_visibility: f64,
    pub occlusion: Option<Occlusion>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_tracks: 15,
            length: 200,
            width: 1920,
            height: 1080,
            motion_noise: 0.3,
            jitter: 2.0,
            drop_prob: 0.2,
            fp_rate: 0.5,
            score_beta: 1.0,
            score_noise: 0.05,
            fp_score_shape: (2.0, 8.0),
            clip_at_border: true,
            camera_pan: (0.0, 0.0),
            camera_shake: 0.0,
            height_model: (0.3, 10.0),
            spawn_bottom: (0.5, 1.1),
            max_speed: (4.0, 0.5),
            min_track_len: 20,
            min_visibility: 0.25,
            occlusion: None,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Exact detections: no motion noise, jitter, dropout, false positives or clipping.
    pub fn noiseless(seed: u64) -> Self {
        SimConfig {
            motion_noise: 0.0,
            jitter: 0.0,
            drop_prob: 0.0,
            fp_rate: 0.0,
            score_noise: 0.0,
            clip_at_border: false,
            seed,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_tracks == 0 || self.length < self.min_track_len.max(1) || self.width == 0 || self.height == 0 {
            return Err(Error::invalid("n_tracks, image size must be positive and length >= min_track_len"));
        }
        if !prob(self.drop_prob) || !prob(self.min_visibility) {
            return Err(Error::invalid("drop_prob and min_visibility must lie in [0, 1]"));
        }
        if [self.motion_noise, self.jitter, self.fp_rate, self.score_noise, self.camera_shake]
            .iter()
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::invalid("noise levels and fp_rate must be finite and nonnegative"));
        }
        if !(self.fp_score_shape.0 > 0.0 && self.fp_score_shape.1 > 0.0) {
            return Err(Error::invalid("fp_score_shape parameters must be positive"));
        }
        if !(self.spawn_bottom.0 < self.spawn_bottom.1) {
            return Err(Error::invalid("spawn_bottom range is empty"));
        }
        if let Some(o) = self.occlusion {
            if !prob(o.prob) || o.min_len == 0 || o.min_len > o.max_len {
                return Err(Error::invalid("occlusion needs prob in [0, 1] and 1 <= min_len <= max_len"));
            }
        }
        Ok(())
    }

    pub fn is_panning(&self) -> bool {
        self.camera_pan != (0.0, 0.0) || self.camera_shake > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub meta: SequenceMeta,
    pub gt: Vec<Trajectory<f64>>,
    pub dets: BTreeMap<u32, Vec<BBox<f64>>>,
    /// Warps taking frame `t - 1` image coordinates to frame `t`.
    pub warps: WarpTable<f64>,
}

impl SimOutput {
    pub fn num_gt_boxes(&self) -> usize {
        self.gt.iter().map(|t| t.len()).sum()
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("nonnegative sd")
}

/// Camera offsets per frame (index 0 is frame 1) and the matching warps.
fn camera_path(cfg: &SimConfig) -> (Vec<(f64, f64)>, WarpTable<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xC0FF_EE00);
    let shake = normal(cfg.camera_shake);
    let mut offsets = Vec::with_capacity(cfg.length as usize);
    let mut warps = WarpTable::new();
    let mut c = (0.0, 0.0);
    offsets.push(c);
    for frame in 2..=cfg.length {
        let dx = cfg.camera_pan.0 + shake.sample(&mut rng);
        let dy = cfg.camera_pan.1 + shake.sample(&mut rng);
        c = (c.0 + dx, c.1 + dy);
        offsets.push(c);
        if cfg.is_panning() {
            warps.insert(WarpMatrix::translation(frame, -dx, -dy));
        }
    }
    (offsets, warps)
}

struct Walker {
    x: f64,
    yb: f64,
    vx: f64,
    vy: f64,
}

/// One person's ground truth, or `None` when its visible run is too short.
fn simulate_person(
    cfg: &SimConfig,
    id: u64,
    birth: u32,
    offsets: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Option<Trajectory<f64>> {
    let (w_img, h_img) = (cfg.width as f64, cfg.height as f64);
    let (a, b) = cfg.height_model;
    let c0 = offsets[(birth - 1) as usize];
    let yb = rng.random_range(cfg.spawn_bottom.0..cfg.spawn_bottom.1) * h_img;
    let hw = (a * yb + b) / 2.6 / 2.0;
    // spawn fully inside horizontally, away from the side borders
    let lo = (0.1 * w_img).max(hw);
    let hi = (0.9 * w_img).min(w_img - hw);
    let x = if lo < hi { rng.random_range(lo..hi) } else { w_img / 2.0 };
    let mut p = Walker {
        x: x + c0.0,
        yb: yb + c0.1,
        vx: rng.random_range(-cfg.max_speed.0..=cfg.max_speed.0),
        vy: rng.random_range(-cfg.max_speed.1..=cfg.max_speed.1),
    };
    let step = normal(cfg.motion_noise);
    let mut t = Trajectory::new(id);
    for frame in birth..=cfg.length {
        let c = offsets[(frame - 1) as usize];
        let yb_img = p.yb - c.1;
        let h = (a * yb_img + b).max(10.0);
        let w = h / 2.6;
        let bx = BBox::new(p.x - c.0 - w / 2.0, yb_img - h, w, h, 1.0, frame);
        let visible = bx.visible_area(w_img, h_img) / bx.area();
        if visible < cfg.min_visibility {
            if t.is_empty() {
                return None;
            }
            break;
        }
        t.push(quantize_box(&bx));
        p.x += p.vx + step.sample(rng);
        p.yb += p.vy + step.sample(rng);
    }
    (t.len() as u32 >= cfg.min_track_len).then_some(t)
}

/// Generates one sequence. Deterministic for a given config.
pub fn generate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let (offsets, warps) = camera_path(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let last_birth = cfg.length - cfg.min_track_len + 1;
    let mut gt = Vec::with_capacity(cfg.n_tracks);
    let mut attempts = 0;
    while gt.len() < cfg.n_tracks {
        attempts += 1;
        if attempts > 100 * cfg.n_tracks {
            return Err(Error::invalid("could not place enough tracks; relax min_track_len or spawn ranges"));
        }
        let birth = if gt.len() < cfg.n_tracks / 2 { 1 } else { rng.random_range(1..=last_birth) };
        if let Some(t) = simulate_person(cfg, gt.len() as u64 + 1, birth, &offsets, &mut rng) {
            gt.push(t);
        }
    }

    let mut drng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD37);
    let jitter = normal(cfg.jitter);
    let score_noise = normal(cfg.score_noise);
    let mut gaps: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
    if let Some(o) = cfg.occlusion {
        for t in &gt {
            let (first, last) = (t.first_frame().unwrap(), t.last_frame().unwrap());
            if drng.random::<f64>() < o.prob {
                let len = drng.random_range(o.min_len..=o.max_len);
                // keep at least 10 visible frames on both sides
                if last >= first + len + 20 {
                    let start = drng.random_range(first + 10..=last - len - 10);
                    gaps.insert(t.id, (start, start + len - 1));
                }
            }
        }
    }

    let (w_img, h_img) = (cfg.width as f64, cfg.height as f64);
    let mut dets: BTreeMap<u32, Vec<BBox<f64>>> = BTreeMap::new();
    for t in &gt {
        for (&f, g) in &t.boxes {
            let dropped = drng.random::<f64>() < cfg.drop_prob;
            let noise: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut drng));
            let s_noise = score_noise.sample(&mut drng);
            if dropped || gaps.get(&t.id).is_some_and(|&(s, e)| (s..=e).contains(&f)) {
                continue;
            }
            let mut d = BBox::new(
                g.x + noise[0],
                g.y + noise[1],
                (g.w + noise[2]).max(2.0),
                (g.h + noise[3]).max(2.0),
                1.0,
                f,
            );
            if cfg.clip_at_border {
                match d.clip_to(w_img, h_img) {
                    Some(c) => d = c,
                    None => continue,
                }
            }
            d.score = (1.0 - cfg.score_beta * (1.0 - iou(&d, g)) + s_noise).clamp(0.0, 1.0);
            dets.entry(f).or_default().push(quantize_box(&d));
        }
    }
    if cfg.fp_rate > 0.0 {
        let poisson = Poisson::new(cfg.fp_rate).map_err(|e| Error::invalid(e.to_string()))?;
        let beta = Beta::new(cfg.fp_score_shape.0, cfg.fp_score_shape.1).map_err(|e| Error::invalid(e.to_string()))?;
        for f in 1..=cfg.length {
            let n = poisson.sample(&mut drng) as usize;
            for _ in 0..n {
                let h = drng.random_range(40.0..(0.3 * h_img).max(41.0));
                let w = h / 2.6 * drng.random_range(0.8..1.2);
                let x = drng.random_range(0.0..(w_img - w).max(1.0));
                let y = drng.random_range(0.0..(h_img - h).max(1.0));
                let s = beta.sample(&mut drng);
                dets.entry(f).or_default().push(quantize_box(&BBox::new(x, y, w, h, s, f)));
            }
        }
    }

    let kind = if cfg.is_panning() { SceneKind::Dynamic } else { SceneKind::Static };
    let meta = SequenceMeta::new(format!("SIM-{:04}", cfg.seed), cfg.width, cfg.height, 30.0, cfg.length).with_scene(kind);
    Ok(SimOutput { meta, gt, dets, warps })
}
