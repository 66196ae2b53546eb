//! Recovering full-body boxes for detections clipped by the image border.
//!
//! Two heuristics: a fixed height/width ratio, and a linear model of
//! pedestrian height against the Y coordinate of the unclipped box edge
//! (useful for elevated cameras looking along a walkway).

use crate::error::{Error, Result};
use crate::geom::{BBox, SequenceMeta};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeightAnchor {
    /// Height predicted from the box's top edge; used when the bottom is clipped.
    TopY,
    /// Height predicted from the box's bottom edge; used when the top is clipped.
    BottomY,
}

/// `h = a * y + b`, with `y` the anchored edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightModel<T> {
    pub a: T,
    pub b: T,
    pub anchor: HeightAnchor,
}

impl<T: Scalar> HeightModel<T> {
    pub fn predict(&self, y: T) -> T {
        self.a * y + self.b
    }

    /// Sum of squared residuals over `samples`.
    pub fn residual(&self, samples: &[(T, T)]) -> T {
        samples
            .iter()
            .fold(T::zero(), |acc, &(y, h)| acc + (h - self.predict(y)).powi(2))
    }
}

/// Ordinary least squares fit of `h = a * y + b`.
pub fn fit_height_model<T: Scalar>(samples: &[(T, T)], anchor: HeightAnchor) -> Result<HeightModel<T>> {
    if samples.len() < 2 {
        return Err(Error::invalid("height model needs at least two samples"));
    }
    let n = T::lit(samples.len() as f64);
    let mean_y = samples.iter().fold(T::zero(), |acc, s| acc + s.0) / n;
    let mean_h = samples.iter().fold(T::zero(), |acc, s| acc + s.1) / n;
    let mut syy = T::zero();
    let mut syh = T::zero();
    for &(y, h) in samples {
        syy += (y - mean_y) * (y - mean_y);
        syh += (y - mean_y) * (h - mean_h);
    }
    let spread = samples.iter().any(|s| s.0 != samples[0].0);
    if !spread || syy <= T::zero() {
        return Err(Error::invalid("degenerate height fit: all sample Y values are identical"));
    }
    let a = syh / syy;
    Ok(HeightModel {
        a,
        b: mean_h - a * mean_y,
        anchor,
    })
}

/// Height models available for a sequence, keyed by which edge they read.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeightModels<T> {
    pub top: Option<HeightModel<T>>,
    pub bottom: Option<HeightModel<T>>,
}

impl<T: Scalar> HeightModels<T> {
    pub fn from_model(m: HeightModel<T>) -> Self {
        match m.anchor {
            HeightAnchor::TopY => HeightModels { top: Some(m), bottom: None },
            HeightAnchor::BottomY => HeightModels { top: None, bottom: Some(m) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendMode<T> {
    /// Target height/width ratio.
    AspectRatio(T),
    HeightModel(HeightModels<T>),
}

/// Extends a border-clipped box away from the clipped border.
///
/// Vertical clipping extends the height; under an aspect ratio a box clipped
/// only on a side also has its width restored to `h / r`. Boxes farther than
/// `margin` from every border, and boxes already at least as large as the
/// heuristic predicts, come back unchanged.
pub fn extend_box<T: Scalar>(b: &BBox<T>, meta: &SequenceMeta, mode: &ExtendMode<T>, margin: T) -> BBox<T> {
    let width = T::lit(meta.width as f64);
    let height = T::lit(meta.height as f64);
    let top = b.y <= margin;
    let bottom = b.bottom() >= height - margin;
    let left = b.x <= margin;
    let right = b.right() >= width - margin;

    let mut out = *b;
    if top == bottom {
        // both or neither vertical border: the height is either reliable or unrecoverable
        if top || !(left || right) {
            return out;
        }
        if let ExtendMode::AspectRatio(r) = mode {
            if left != right {
                let target = b.h / *r;
                if target > b.w {
                    if left {
                        out.x = b.right() - target;
                    }
                    out.w = target;
                }
            }
        }
        return out;
    }

    let target = match mode {
        ExtendMode::AspectRatio(r) => Some(*r * b.w),
        ExtendMode::HeightModel(models) => {
            if bottom {
                models.top.map(|m| m.predict(b.y))
            } else {
                models.bottom.map(|m| m.predict(b.bottom()))
            }
        }
    };
    if let Some(target) = target {
        if target > b.h {
            if top {
                out.y = b.bottom() - target;
            }
            out.h = target;
        }
    }
    out
}

/// Picks height samples `(edge y, h)` from confident detections that touch no border.
pub fn auto_height_samples<T: Scalar>(
    dets: &[BBox<T>],
    meta: &SequenceMeta,
    anchor: HeightAnchor,
    min_score: T,
    margin: T,
) -> Vec<(T, T)> {
    let width = T::lit(meta.width as f64);
    let height = T::lit(meta.height as f64);
    dets.iter()
        .filter(|d| {
            d.score >= min_score
                && d.x > margin
                && d.y > margin
                && d.right() < width - margin
                && d.bottom() < height - margin
        })
        .map(|d| match anchor {
            HeightAnchor::TopY => (d.y, d.h),
            HeightAnchor::BottomY => (d.bottom(), d.h),
        })
        .collect()
}
