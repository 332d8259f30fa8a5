use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::{Hypothesis, ModelKind, NormalizationTransform, ProblemModel};

/// Line in the plane, `θ₁x + θ₂y − α = 0`. The carrier is the input itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Line2D;

impl ProblemModel for Line2D {
    fn kind(&self) -> ModelKind {
        ModelKind::Line2D
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn carrier_dim(&self) -> usize {
        2
    }

    fn coordinate_blocks(&self) -> Vec<Range<usize>> {
        vec![0..2]
    }

    fn carrier(&self, y: &[f64], _c: usize) -> DVector<f64> {
        DVector::from_column_slice(&y[..2])
    }

    fn jacobian(&self, _y: &[f64], _c: usize) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }

    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis {
        // l = Tᵀ l', with l = [θ₁, θ₂, −α]
        let l_n = DVector::from_vec(vec![h.theta[0], h.theta[1], -h.alpha]);
        let l = t.blocks[0].homogeneous().transpose() * l_n;
        Hypothesis::new(DVector::from_vec(vec![l[0], l[1]]), -l[2]).unwrap_or_else(|| h.clone())
    }
}
