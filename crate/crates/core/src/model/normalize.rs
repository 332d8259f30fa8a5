use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DataPoint, Hypothesis, ProblemModel};
use crate::error::{Error, Result};

/// Similarity normalization of one coordinate block: `y' = scale · (y − centroid)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTransform {
    pub range: Range<usize>,
    pub centroid: Vec<f64>,
    pub scale: f64,
}

impl BlockTransform {
    pub fn dim(&self) -> usize {
        self.range.len()
    }

    /// Homogeneous `(d+1) × (d+1)` matrix of the map.
    pub fn homogeneous(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut t = DMatrix::identity(d + 1, d + 1);
        for k in 0..d {
            t[(k, k)] = self.scale;
            t[(k, d)] = -self.scale * self.centroid[k];
        }
        t
    }

    /// Homogeneous matrix of the inverse map.
    pub fn homogeneous_inverse(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut t = DMatrix::identity(d + 1, d + 1);
        for k in 0..d {
            t[(k, k)] = 1.0 / self.scale;
            t[(k, d)] = self.centroid[k];
        }
        t
    }
}

/// Per-block similarity transforms applied before estimation.
///
/// Each block is centred on its centroid and scaled so the mean distance
/// from the origin is `√d` (`√2` for image coordinates, `√3` in space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub blocks: Vec<BlockTransform>,
}

impl NormalizationTransform {
    pub fn identity(model: &dyn ProblemModel) -> Self {
        Self {
            blocks: model
                .coordinate_blocks()
                .into_iter()
                .map(|range| BlockTransform {
                    centroid: vec![0.0; range.len()],
                    range,
                    scale: 1.0,
                })
                .collect(),
        }
    }

    pub fn fit(points: &[DataPoint], model: &dyn ProblemModel) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate(
                "normalization needs at least two points".into(),
            ));
        }
        let n = points.len() as f64;
        let mut blocks = Vec::new();
        for range in model.coordinate_blocks() {
            let d = range.len();
            let mut centroid = vec![0.0; d];
            for p in points {
                if p.y.len() != model.input_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: model.input_dim(),
                        actual: p.y.len(),
                    });
                }
                for (k, c) in centroid.iter_mut().enumerate() {
                    *c += p.y[range.start + k];
                }
            }
            centroid.iter_mut().for_each(|c| *c /= n);
            let mean_dist = points
                .iter()
                .map(|p| {
                    (0..d)
                        .map(|k| (p.y[range.start + k] - centroid[k]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
                / n;
            if !(mean_dist > 0.0) || !mean_dist.is_finite() {
                return Err(Error::Degenerate("all points are identical".into()));
            }
            blocks.push(BlockTransform {
                scale: (d as f64).sqrt() / mean_dist,
                centroid,
                range,
            });
        }
        Ok(Self { blocks })
    }

    pub fn input_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.range.end).max().unwrap_or(0)
    }

    fn coordinate_scales(&self) -> Vec<f64> {
        let mut s = vec![1.0; self.input_dim()];
        for b in &self.blocks {
            for k in b.range.clone() {
                s[k] = b.scale;
            }
        }
        s
    }

    /// Geometric mean `g` of the coordinate scales. Mahalanobis distances in
    /// normalized space are `g` times the distances in original units.
    pub fn sigma_factor(&self) -> f64 {
        let s = self.coordinate_scales();
        (s.iter().map(|v| v.ln()).sum::<f64>() / s.len() as f64).exp()
    }

    pub fn apply_coords(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for b in &self.blocks {
            for (k, i) in b.range.clone().enumerate() {
                out[i] = b.scale * (y[i] - b.centroid[k]);
            }
        }
        out
    }

    pub fn invert_coords(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for b in &self.blocks {
            for (k, i) in b.range.clone().enumerate() {
                out[i] = y[i] / b.scale + b.centroid[k];
            }
        }
        out
    }

    /// Maps a point, carrying its covariance to `A C Aᵀ / g²` so that the
    /// determinant stays one.
    pub fn apply(&self, p: &DataPoint) -> DataPoint {
        let y = self.apply_coords(&p.y);
        let scales = self.coordinate_scales();
        let isotropic = scales.iter().all(|&s| s == scales[0]);
        let covariance = if isotropic {
            p.covariance.clone()
        } else {
            let g2 = self.sigma_factor().powi(2);
            let c = p.covariance_or_identity();
            Some(DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| {
                scales[i] * c[(i, j)] * scales[j] / g2
            }))
        };
        DataPoint { y, covariance }
    }
}

/// Normalizes every coordinate block of `points` independently.
pub fn normalize(
    points: &[DataPoint],
    model: &dyn ProblemModel,
) -> Result<(Vec<DataPoint>, NormalizationTransform)> {
    let t = NormalizationTransform::fit(points, model)?;
    let out = points.iter().map(|p| t.apply(p)).collect();
    Ok((out, t))
}

/// Maps a hypothesis and a Mahalanobis scale found on normalized data back to
/// original units.
pub fn denormalize(
    model: &dyn ProblemModel,
    h: &Hypothesis,
    scale: f64,
    t: &NormalizationTransform,
) -> (Hypothesis, f64) {
    (
        model.denormalize_hypothesis(h, t),
        scale / t.sigma_factor(),
    )
}
