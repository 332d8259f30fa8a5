use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix3};

use super::{Hypothesis, ModelKind, NormalizationTransform, ProblemModel};

/// Planar homography `y′ ≃ H y` over correspondences `(x, y, x′, y′)`.
///
/// Each point contributes the two DLT rows as carriers. `θ = vec(Hᵀ)` has nine
/// entries and the intercept is fixed at zero, so four correspondences (eight
/// equations) form an elemental subset.
#[derive(Debug, Clone, Copy, Default)]
pub struct Homography;

impl Homography {
    pub fn to_matrix(h: &Hypothesis) -> Matrix3<f64> {
        Matrix3::from_row_slice(h.theta.as_slice())
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Option<Hypothesis> {
        let rows: Vec<f64> = (0..3).flat_map(|r| (0..3).map(move |c| m[(r, c)])).collect();
        Hypothesis::new(DVector::from_vec(rows), 0.0)
    }

    /// Maps `(x, y)` through `H`.
    pub fn transfer(m: &Matrix3<f64>, x: f64, y: f64) -> [f64; 2] {
        let p = m * nalgebra::Vector3::new(x, y, 1.0);
        [p[0] / p[2], p[1] / p[2]]
    }
}

impl ProblemModel for Homography {
    fn kind(&self) -> ModelKind {
        ModelKind::Homography
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn carrier_dim(&self) -> usize {
        9
    }

    fn carriers_per_point(&self) -> usize {
        2
    }

    fn has_intercept(&self) -> bool {
        false
    }

    fn coordinate_blocks(&self) -> Vec<Range<usize>> {
        vec![0..2, 2..4]
    }

    fn carrier(&self, y: &[f64], c: usize) -> DVector<f64> {
        let (x, v, xp, yp) = (y[0], y[1], y[2], y[3]);
        if c == 0 {
            DVector::from_vec(vec![-x, -v, -1.0, 0.0, 0.0, 0.0, xp * x, xp * v, xp])
        } else {
            DVector::from_vec(vec![0.0, 0.0, 0.0, -x, -v, -1.0, yp * x, yp * v, yp])
        }
    }

    fn jacobian(&self, y: &[f64], c: usize) -> DMatrix<f64> {
        let (x, v, xp, yp) = (y[0], y[1], y[2], y[3]);
        let mut j = DMatrix::zeros(9, 4);
        let (offset, primed, primed_col) = if c == 0 { (0, xp, 2) } else { (3, yp, 3) };
        j[(offset, 0)] = -1.0;
        j[(offset + 1, 1)] = -1.0;
        j[(6, 0)] = primed;
        j[(7, 1)] = primed;
        j[(6, primed_col)] = x;
        j[(7, primed_col)] = v;
        j[(8, primed_col)] = 1.0;
        j
    }

    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis {
        let t1 = t.blocks[0].homogeneous();
        let t2_inv = t.blocks[1].homogeneous_inverse();
        let h_n = DMatrix::from_column_slice(3, 3, Self::to_matrix(h).as_slice());
        let m = t2_inv * h_n * t1;
        Self::from_matrix(&Matrix3::from_column_slice(m.as_slice())).unwrap_or_else(|| h.clone())
    }
}
