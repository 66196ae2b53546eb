//! MOT Challenge CSV files. Coordinates are 1-based in files and 0-based in memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{BBox, Trajectory};
use crate::metrics::GtBox;

/// Per-frame detections, input order preserved within a frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detections {
    pub frames: BTreeMap<u32, Vec<BBox<f64>>>,
    /// Rows dropped for nonpositive width or height.
    pub skipped: usize,
}

impl Detections {
    pub fn len(&self) -> usize {
        self.frames.values().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Row<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

impl Row<'_> {
    fn num(&self, k: usize, name: &str) -> Result<f64> {
        let s = self
            .fields
            .get(k)
            .ok_or_else(|| Error::parse(self.line, format!("missing field `{name}`")))?;
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::parse(self.line, format!("field `{name}`: `{}` is not a number", s.trim())))?;
        if !v.is_finite() {
            return Err(Error::parse(self.line, format!("field `{name}` is not finite")));
        }
        Ok(v)
    }

    fn int(&self, k: usize, name: &str) -> Result<i64> {
        let v = self.num(k, name)?;
        if v.fract() != 0.0 {
            return Err(Error::parse(self.line, format!("field `{name}` must be an integer, got {v}")));
        }
        Ok(v as i64)
    }

    fn frame(&self) -> Result<u32> {
        let f = self.int(0, "frame")?;
        u32::try_from(f)
            .ok()
            .filter(|&f| f >= 1)
            .ok_or_else(|| Error::parse(self.line, format!("frame must be >= 1, got {f}")))
    }

    fn bbox(&self, frame: u32, score: f64) -> Result<BBox<f64>> {
        Ok(BBox::new(
            self.num(2, "x")? - 1.0,
            self.num(3, "y")? - 1.0,
            self.num(4, "w")?,
            self.num(5, "h")?,
            score,
            frame,
        ))
    }
}

fn rows(text: &str) -> impl Iterator<Item = Row<'_>> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then(|| Row {
            line: k + 1,
            fields: l.split(',').collect(),
        })
    })
}

/// Parses a detection file (`frame,-1,x,y,w,h,score,...`).
pub fn parse_detections(text: &str) -> Result<Detections> {
    let mut out = Detections::default();
    for row in rows(text) {
        if row.fields.len() < 7 {
            return Err(Error::parse(row.line, format!("expected at least 7 fields, got {}", row.fields.len())));
        }
        let frame = row.frame()?;
        row.int(1, "id")?;
        let b = row.bbox(frame, row.num(6, "score")?)?;
        if b.w <= 0.0 || b.h <= 0.0 {
            out.skipped += 1;
            continue;
        }
        out.frames.entry(frame).or_default().push(b);
    }
    if out.skipped > 0 {
        log::warn!("skipped {} detections with nonpositive size", out.skipped);
    }
    Ok(out)
}

/// Parses a tracker output file (`frame,id,x,y,w,h,score,...`).
pub fn parse_tracks(text: &str) -> Result<Vec<Trajectory<f64>>> {
    let mut tracks: BTreeMap<u64, Trajectory<f64>> = BTreeMap::new();
    for row in rows(text) {
        if row.fields.len() < 6 {
            return Err(Error::parse(row.line, format!("expected at least 6 fields, got {}", row.fields.len())));
        }
        let frame = row.frame()?;
        let id = row.int(1, "id")?;
        let id = u64::try_from(id)
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| Error::parse(row.line, format!("track id must be >= 1, got {id}")))?;
        let score = if row.fields.len() > 6 { row.num(6, "score")? } else { 1.0 };
        let b = row.bbox(frame, score)?;
        let t = tracks.entry(id).or_insert_with(|| Trajectory::new(id));
        if t.get(frame).is_some() {
            return Err(Error::parse(row.line, format!("track {id} has two boxes in frame {frame}")));
        }
        t.push(b);
    }
    Ok(tracks.into_values().collect())
}

/// Parses ground truth. Nine columns carry `consider,class,visibility`; with
/// fewer, missing columns default to a considered, fully visible pedestrian.
pub fn parse_gt(text: &str) -> Result<Vec<GtBox>> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in rows(text) {
        if row.fields.len() < 6 {
            return Err(Error::parse(row.line, format!("expected at least 6 fields, got {}", row.fields.len())));
        }
        let frame = row.frame()?;
        let id = row.int(1, "id")?;
        let id = u64::try_from(id).map_err(|_| Error::parse(row.line, format!("negative gt id {id}")))?;
        if !seen.insert((id, frame)) {
            return Err(Error::parse(row.line, format!("gt id {id} has two boxes in frame {frame}")));
        }
        let n = row.fields.len();
        let consider = if n > 6 { row.num(6, "consider")? != 0.0 } else { true };
        let class = if n > 7 { row.int(7, "class")? as i32 } else { 1 };
        let visibility = if n > 8 { row.num(8, "visibility")? } else { 1.0 };
        out.push(GtBox {
            id,
            bbox: row.bbox(frame, 1.0)?,
            consider,
            class,
            visibility,
        });
    }
    Ok(out)
}

/// Ground truth as trajectories, keeping only considered pedestrian rows.
pub fn gt_trajectories(gt: &[GtBox]) -> Vec<Trajectory<f64>> {
    let mut tracks: BTreeMap<u64, Trajectory<f64>> = BTreeMap::new();
    for g in gt.iter().filter(|g| g.consider && g.class == crate::metrics::PEDESTRIAN_CLASS) {
        tracks.entry(g.id).or_insert_with(|| Trajectory::new(g.id)).push(g.bbox);
    }
    tracks.into_values().collect()
}

fn coord(v: f64) -> String {
    format!("{:.2}", v + 1.0)
}

fn fixed(v: f64) -> String {
    format!("{:.2}", v)
}

/// The value `v` takes after a write/parse cycle as a 0-based coordinate.
pub fn quantize_coord(v: f64) -> f64 {
    coord(v).parse::<f64>().expect("formatted float") - 1.0
}

/// The value `v` takes after a write/parse cycle as a size or score.
pub fn quantize_value(v: f64) -> f64 {
    fixed(v).parse().expect("formatted float")
}

pub fn quantize_box(b: &BBox<f64>) -> BBox<f64> {
    BBox::new(
        quantize_coord(b.x),
        quantize_coord(b.y),
        quantize_value(b.w),
        quantize_value(b.h),
        quantize_value(b.score),
        b.frame,
    )
}

/// Applies [`quantize_box`] to every box; synthetic flags are dropped, as
/// they would be by a file round trip.
pub fn quantize_tracks(tracks: &[Trajectory<f64>]) -> Vec<Trajectory<f64>> {
    let mut out: Vec<Trajectory<f64>> = tracks
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| Trajectory::from_boxes(t.id, t.boxes.values().map(quantize_box)))
        .collect();
    out.sort_by_key(|t| t.id);
    out
}

fn box_line(out: &mut String, frame: u32, id: &str, b: &BBox<f64>, tail: &str) {
    let _ = writeln!(
        out,
        "{frame},{id},{},{},{},{},{}",
        coord(b.x),
        coord(b.y),
        fixed(b.w),
        fixed(b.h),
        tail.replace("{score}", &fixed(b.score))
    );
}

/// Writes tracker output, sorted by frame then id.
pub fn write_tracks(tracks: &[Trajectory<f64>]) -> String {
    let mut out = String::new();
    for (frame, boxes) in crate::postprocess::by_frame(tracks) {
        for (id, b) in boxes {
            box_line(&mut out, frame, &id.to_string(), &b, "{score},-1,-1,-1");
        }
    }
    out
}

pub fn write_detections(frames: &BTreeMap<u32, Vec<BBox<f64>>>) -> String {
    let mut out = String::new();
    for (&frame, boxes) in frames {
        for b in boxes {
            box_line(&mut out, frame, "-1", b, "{score},-1,-1,-1");
        }
    }
    out
}

/// Writes ground truth with every row considered, class 1 and visibility 1.
pub fn write_gt(tracks: &[Trajectory<f64>]) -> String {
    let mut out = String::new();
    for (frame, boxes) in crate::postprocess::by_frame(tracks) {
        for (id, b) in boxes {
            box_line(&mut out, frame, &id.to_string(), &b, "1,1,1");
        }
    }
    out
}
