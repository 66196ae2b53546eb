//! Pyramid consistency loss over pooled multi-style features.
//!
//! For an image rendered in `K + 1` styles, each pyramid layer's pooled
//! feature vectors are pulled toward their mean across styles:
//! `loss = sum_k sum_l lambda_l * |mean_l - pooled(k, l)|_1`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_LAYER_WEIGHT: f64 = 0.5;

/// `features[k][l]` is the pooled vector of style `k` at pyramid layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramidSet<T> {
    pub features: Vec<Vec<Vec<T>>>,
    pub layer_weights: Vec<T>,
}

impl<T: Scalar> FeaturePyramidSet<T> {
    /// Uses the default weight of 0.5 on every layer.
    pub fn new(features: Vec<Vec<Vec<T>>>) -> Self {
        let layers = features.first().map_or(0, |f| f.len());
        FeaturePyramidSet {
            features,
            layer_weights: vec![T::lit(DEFAULT_LAYER_WEIGHT); layers],
        }
    }

    pub fn styles(&self) -> usize {
        self.features.len()
    }

    pub fn layers(&self) -> usize {
        self.layer_weights.len()
    }

    fn validate(&self) -> Result<()> {
        if self.styles() < 2 {
            return Err(Error::invalid("consistency loss needs at least two styles (K >= 1)"));
        }
        for (k, style) in self.features.iter().enumerate() {
            if style.len() != self.layers() {
                return Err(Error::invalid(format!(
                    "style {k} has {} layers, expected {}",
                    style.len(),
                    self.layers()
                )));
            }
            for (l, v) in style.iter().enumerate() {
                if v.len() != self.features[0][l].len() {
                    return Err(Error::invalid(format!(
                        "layer {l} of style {k} has length {}, expected {}",
                        v.len(),
                        self.features[0][l].len()
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn pyramid_consistency_loss<T: Scalar>(p: &FeaturePyramidSet<T>) -> Result<T> {
    p.validate()?;
    let styles = T::lit(p.styles() as f64);
    let mut loss = T::zero();
    for (l, &lambda) in p.layer_weights.iter().enumerate() {
        let dim = p.features[0][l].len();
        let mut mean = vec![T::zero(); dim];
        for style in &p.features {
            for (m, &v) in mean.iter_mut().zip(&style[l]) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= styles;
        }
        for style in &p.features {
            let l1 = mean
                .iter()
                .zip(&style[l])
                .fold(T::zero(), |acc, (&m, &v)| acc + (m - v).abs());
            loss += lambda * l1;
        }
    }
    Ok(loss)
}

/// Global average pooling of a `rows x cols` grid of channel vectors.
pub fn adaptive_avg_pool<T: Scalar>(grid: &[Vec<Vec<T>>]) -> Result<Vec<T>> {
    let channels = grid
        .first()
        .and_then(|row| row.first())
        .map(|c| c.len())
        .ok_or_else(|| Error::invalid("feature map is empty"))?;
    let mut acc = vec![T::zero(); channels];
    let mut cells = 0usize;
    for row in grid {
        for cell in row {
            if cell.len() != channels {
                return Err(Error::invalid("feature map cells disagree on channel count"));
            }
            for (a, &v) in acc.iter_mut().zip(cell) {
                *a += v;
            }
            cells += 1;
        }
    }
    let n = T::lit(cells as f64);
    Ok(acc.into_iter().map(|a| a / n).collect())
}
