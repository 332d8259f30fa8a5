use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix3};

use super::{Hypothesis, ModelKind, NormalizationTransform, ProblemModel};

/// Epipolar constraint `[x′ y′ 1] F [x y 1]ᵀ = 0` over correspondences
/// `(x, y, x′, y′)`. Carrier order is `[x, y, x′, y′, xx′, xy′, yx′, yy′]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FundamentalMatrix;

impl FundamentalMatrix {
    /// The 3×3 matrix `F` encoded by a hypothesis.
    pub fn to_matrix(h: &Hypothesis) -> Matrix3<f64> {
        let t = &h.theta;
        Matrix3::new(t[4], t[6], t[2], t[5], t[7], t[3], t[0], t[1], -h.alpha)
    }

    pub fn from_matrix(f: &Matrix3<f64>) -> Option<Hypothesis> {
        Hypothesis::new(
            DVector::from_vec(vec![
                f[(2, 0)],
                f[(2, 1)],
                f[(0, 2)],
                f[(1, 2)],
                f[(0, 0)],
                f[(1, 0)],
                f[(0, 1)],
                f[(1, 1)],
            ]),
            -f[(2, 2)],
        )
    }

    /// Closest rank-2 matrix in Frobenius norm, scaled to unit norm.
    pub fn rank2_projection(f: &Matrix3<f64>) -> Matrix3<f64> {
        let svd = f.svd(true, true);
        let mut s = svd.singular_values;
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let imin = s.imin();
        s[imin] = 0.0;
        let out = u * Matrix3::from_diagonal(&s) * v_t;
        out / out.norm()
    }
}

impl ProblemModel for FundamentalMatrix {
    fn kind(&self) -> ModelKind {
        ModelKind::FundamentalMatrix
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn carrier_dim(&self) -> usize {
        8
    }

    fn coordinate_blocks(&self) -> Vec<Range<usize>> {
        vec![0..2, 2..4]
    }

    fn carrier(&self, y: &[f64], _c: usize) -> DVector<f64> {
        let (x, v, xp, yp) = (y[0], y[1], y[2], y[3]);
        DVector::from_vec(vec![x, v, xp, yp, x * xp, x * yp, v * xp, v * yp])
    }

    fn jacobian(&self, y: &[f64], _c: usize) -> DMatrix<f64> {
        let (x, v, xp, yp) = (y[0], y[1], y[2], y[3]);
        DMatrix::from_row_slice(
            8,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                xp, 0.0, x, 0.0, //
                yp, 0.0, 0.0, x, //
                0.0, xp, v, 0.0, //
                0.0, yp, 0.0, v,
            ],
        )
    }

    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis {
        let t1 = t.blocks[0].homogeneous();
        let t2 = t.blocks[1].homogeneous();
        let f_n = DMatrix::from_column_slice(3, 3, Self::to_matrix(h).as_slice());
        let f = t2.transpose() * f_n * t1;
        Self::from_matrix(&Matrix3::from_column_slice(f.as_slice())).unwrap_or_else(|| h.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lift, DataPoint};

    #[test]
    fn carrier_monomials() {
        let b = lift(&FundamentalMatrix, &DataPoint::new(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(b.carriers[0].as_slice(), &[1.0, 2.0, 3.0, 4.0, 3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn matrix_encoding_matches_epipolar_form() {
        let f = Matrix3::new(0.1, -0.3, 0.2, 0.5, 0.05, -0.4, 0.7, 0.9, -0.6);
        let h = FundamentalMatrix::from_matrix(&f).unwrap();
        let y = [1.5, -2.0, 0.25, 3.0];
        let lhs = nalgebra::Vector3::new(y[2], y[3], 1.0).dot(&(f * nalgebra::Vector3::new(y[0], y[1], 1.0)));
        let x = FundamentalMatrix.carrier(&y, 0);
        let scale = f.norm_squared() - f[(2, 2)].powi(2);
        assert!((lhs / scale.sqrt() - (x.dot(&h.theta) - h.alpha)).abs() < 1e-12);
    }

    #[test]
    fn origin_bandwidth_uses_linear_terms() {
        let b = lift(&FundamentalMatrix, &DataPoint::new(vec![0.0; 4])).unwrap();
        let theta = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let expected = 0.01 + 0.04 + 0.09 + 0.16;
        assert!((b.projection_variance(0, &theta) - expected).abs() < 1e-15);
    }

    #[test]
    fn rank2_projection_is_singular() {
        let f = Matrix3::new(1.0, 2.0, 3.0, 0.0, 1.0, 4.0, 5.0, 6.0, 0.0);
        let r = FundamentalMatrix::rank2_projection(&f);
        assert!(r.determinant().abs() < 1e-12);
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }
}
