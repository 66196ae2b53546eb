//! Boxes, sequences and trajectories shared by every stage of the pipeline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Axis-aligned box in 0-based pixel coordinates, top-left anchored.
///
/// Boxes may extend past the image border: full-body boxes of clipped
/// pedestrians are represented as they would be without the border.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
    pub score: T,
    /// 1-based frame index.
    pub frame: u32,
}

impl<T: Scalar> BBox<T> {
    pub fn new(x: T, y: T, w: T, h: T, score: T, frame: u32) -> Self {
        BBox {
            x,
            y,
            w,
            h,
            score,
            frame,
        }
    }

    /// Unscored box on frame 1; convenient in tests and geometry code.
    pub fn xywh(x: T, y: T, w: T, h: T) -> Self {
        Self::new(x, y, w, h, T::one(), 1)
    }

    pub fn is_valid(&self) -> bool {
        self.w > T::zero()
            && self.h > T::zero()
            && self.score >= T::zero()
            && self.score <= T::one()
            && self.x.is_finite()
            && self.y.is_finite()
    }

    #[inline]
    pub fn right(&self) -> T {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> T {
        self.y + self.h
    }

    #[inline]
    pub fn area(&self) -> T {
        self.w * self.h
    }

    #[inline]
    pub fn center(&self) -> (T, T) {
        let half = T::lit(0.5);
        (self.x + half * self.w, self.y + half * self.h)
    }

    /// Measurement vector `(center x, center y, w / h, h)`.
    pub fn to_xyah(&self) -> [T; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.w / self.h, self.h]
    }

    pub fn from_xyah(m: &[T; 4], score: T, frame: u32) -> Self {
        let [cx, cy, a, h] = *m;
        let w = a * h;
        let half = T::lit(0.5);
        BBox::new(cx - half * w, cy - half * h, w, h, score, frame)
    }

    pub fn with_score(mut self, score: T) -> Self {
        self.score = score;
        self
    }

    pub fn with_frame(mut self, frame: u32) -> Self {
        self.frame = frame;
        self
    }

    /// True when `other` lies inside this box, allowing `tol` of slack.
    pub fn contains(&self, other: &BBox<T>, tol: T) -> bool {
        other.x >= self.x - tol
            && other.y >= self.y - tol
            && other.right() <= self.right() + tol
            && other.bottom() <= self.bottom() + tol
    }

    /// Area of the part of the box inside a `width` x `height` image.
    pub fn visible_area(&self, width: T, height: T) -> T {
        let iw = (self.right().min(width) - self.x.max(T::zero())).max(T::zero());
        let ih = (self.bottom().min(height) - self.y.max(T::zero())).max(T::zero());
        iw * ih
    }

    /// Intersection with the image rectangle, or `None` when fully outside.
    pub fn clip_to(&self, width: T, height: T) -> Option<BBox<T>> {
        let x0 = self.x.max(T::zero());
        let y0 = self.y.max(T::zero());
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(BBox::new(x0, y0, x1 - x0, y1 - y0, self.score, self.frame))
    }
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    // corner round-off would otherwise leave identical boxes just below 1
    if (a.x, a.y, a.w, a.h) == (b.x, b.y, b.w, b.h) && a.w > T::zero() && a.h > T::zero() {
        return T::one();
    }
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one())
}

/// Euclidean distance between box centers.
pub fn center_distance<T: Scalar>(a: &BBox<T>, b: &BBox<T>) -> T {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    /// Fixed camera.
    #[default]
    Static,
    /// Moving camera or complex motion; gates camera-motion compensation.
    Dynamic,
}

impl std::str::FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(SceneKind::Static),
            "dynamic" => Ok(SceneKind::Dynamic),
            other => Err(format!("unknown scene kind `{other}` (expected static|dynamic)")),
        }
    }
}

impl std::fmt::Display for SceneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SceneKind::Static => "static",
            SceneKind::Dynamic => "dynamic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMeta {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub length: u32,
    pub scene_kind: SceneKind,
}

impl SequenceMeta {
    pub fn new(name: impl Into<String>, width: u32, height: u32, fps: f64, length: u32) -> Self {
        SequenceMeta {
            name: name.into(),
            width,
            height,
            fps,
            length,
            scene_kind: SceneKind::Static,
        }
    }

    pub fn with_scene(mut self, kind: SceneKind) -> Self {
        self.scene_kind = kind;
        self
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0 && self.height > 0 && self.fps > 0.0 && self.length > 0
    }
}

/// One identity's boxes, keyed by frame.
///
/// Frames produced by interpolation or gap filling are recorded in
/// `synthetic` so evaluation can tell them apart from observed boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub id: u64,
    pub boxes: BTreeMap<u32, BBox<T>>,
    pub synthetic: BTreeSet<u32>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(id: u64) -> Self {
        Trajectory {
            id,
            boxes: BTreeMap::new(),
            synthetic: BTreeSet::new(),
        }
    }

    pub fn from_boxes(id: u64, boxes: impl IntoIterator<Item = BBox<T>>) -> Self {
        let mut t = Trajectory::new(id);
        for b in boxes {
            t.boxes.insert(b.frame, b);
        }
        t
    }

    /// Inserts an observed box, replacing any previous box on that frame.
    pub fn push(&mut self, b: BBox<T>) {
        self.synthetic.remove(&b.frame);
        self.boxes.insert(b.frame, b);
    }

    pub fn push_synthetic(&mut self, b: BBox<T>) {
        self.synthetic.insert(b.frame);
        self.boxes.insert(b.frame, b);
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Number of observed (non-synthetic) boxes.
    pub fn observed_len(&self) -> usize {
        self.boxes.len() - self.synthetic.len()
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.boxes.keys().next().copied()
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.boxes.keys().next_back().copied()
    }

    pub fn first(&self) -> Option<&BBox<T>> {
        self.boxes.values().next()
    }

    pub fn last(&self) -> Option<&BBox<T>> {
        self.boxes.values().next_back()
    }

    pub fn get(&self, frame: u32) -> Option<&BBox<T>> {
        self.boxes.get(&frame)
    }

    pub fn is_synthetic(&self, frame: u32) -> bool {
        self.synthetic.contains(&frame)
    }

    pub fn observed(&self) -> impl Iterator<Item = &BBox<T>> + '_ {
        self.boxes
            .iter()
            .filter(|(f, _)| !self.synthetic.contains(f))
            .map(|(_, b)| b)
    }
}
