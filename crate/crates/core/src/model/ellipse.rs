use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{Hypothesis, ModelKind, NormalizationTransform, ProblemModel, ValidityConfig};

/// Conic `θ₁x + θ₂y + θ₃x² + θ₄xy + θ₅y² − α = 0` restricted to ellipses.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ellipse2D;

/// Center / semi-axes / orientation description of an ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseGeometry {
    pub center: [f64; 2],
    /// Semi-axis along the rotated x direction.
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Rotation of the major axis, radians.
    pub angle: f64,
}

impl EllipseGeometry {
    pub fn to_hypothesis(&self) -> Hypothesis {
        let (s, c) = self.angle.sin_cos();
        let (a2, b2) = (self.semi_major.powi(2), self.semi_minor.powi(2));
        let [cx, cy] = self.center;
        let qa = c * c / a2 + s * s / b2;
        let qb = 2.0 * c * s * (1.0 / a2 - 1.0 / b2);
        let qc = s * s / a2 + c * c / b2;
        let qd = -2.0 * qa * cx - qb * cy;
        let qe = -qb * cx - 2.0 * qc * cy;
        let qf = qa * cx * cx + qb * cx * cy + qc * cy * cy - 1.0;
        Hypothesis::new(DVector::from_vec(vec![qd, qe, qa, qb, qc]), -qf)
            .expect("ellipse axes must be positive")
    }

    /// Recovers the geometry of a hypothesis, or `None` if the conic is not a
    /// real ellipse.
    pub fn from_hypothesis(h: &Hypothesis) -> Option<Self> {
        let t = &h.theta;
        let (mut d, mut e, mut a, mut b, mut c, mut f) = (t[0], t[1], t[2], t[3], t[4], -h.alpha);
        if 4.0 * a * c - b * b <= 0.0 {
            return None;
        }
        if a < 0.0 {
            a = -a;
            b = -b;
            c = -c;
            d = -d;
            e = -e;
            f = -f;
        }
        let q = Matrix2::new(a, b / 2.0, b / 2.0, c);
        let lin = Vector2::new(d, e);
        let center = -0.5 * q.try_inverse()? * lin;
        let level = -(f + 0.5 * lin.dot(&center));
        if !(level > 0.0) {
            return None;
        }
        let eig = q.symmetric_eigen();
        let (i_min, i_max) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
            (0, 1)
        } else {
            (1, 0)
        };
        let lam_min = eig.eigenvalues[i_min];
        let lam_max = eig.eigenvalues[i_max];
        if lam_min <= 0.0 {
            return None;
        }
        let major_dir = eig.eigenvectors.column(i_min);
        Some(Self {
            center: [center[0], center[1]],
            semi_major: (level / lam_min).sqrt(),
            semi_minor: (level / lam_max).sqrt(),
            angle: major_dir[1].atan2(major_dir[0]),
        })
    }

    pub fn axis_ratio(&self) -> f64 {
        self.semi_major / self.semi_minor
    }

    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let u = self.semi_major * t.cos();
        let v = self.semi_minor * t.sin();
        [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
    }
}

/// 3×3 symmetric conic matrix `Q` with `[x y 1] Q [x y 1]ᵀ = xᵀθ − α`.
fn conic_matrix(h: &Hypothesis) -> DMatrix<f64> {
    let t = &h.theta;
    DMatrix::from_row_slice(
        3,
        3,
        &[
            t[2],
            t[3] / 2.0,
            t[0] / 2.0,
            t[3] / 2.0,
            t[4],
            t[1] / 2.0,
            t[0] / 2.0,
            t[1] / 2.0,
            -h.alpha,
        ],
    )
}

fn from_conic_matrix(q: &DMatrix<f64>) -> Option<Hypothesis> {
    Hypothesis::new(
        DVector::from_vec(vec![
            2.0 * q[(0, 2)],
            2.0 * q[(1, 2)],
            q[(0, 0)],
            2.0 * q[(0, 1)],
            q[(1, 1)],
        ]),
        -q[(2, 2)],
    )
}

impl ProblemModel for Ellipse2D {
    fn kind(&self) -> ModelKind {
        ModelKind::Ellipse2D
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn carrier_dim(&self) -> usize {
        5
    }

    fn coordinate_blocks(&self) -> Vec<Range<usize>> {
        vec![0..2]
    }

    fn carrier(&self, y: &[f64], _c: usize) -> DVector<f64> {
        let (x, v) = (y[0], y[1]);
        DVector::from_vec(vec![x, v, x * x, x * v, v * v])
    }

    fn jacobian(&self, y: &[f64], _c: usize) -> DMatrix<f64> {
        let (x, v) = (y[0], y[1]);
        DMatrix::from_row_slice(
            5,
            2,
            &[
                1.0, 0.0, //
                0.0, 1.0, //
                2.0 * x, 0.0, //
                v, x, //
                0.0, 2.0 * v,
            ],
        )
    }

    fn is_valid(&self, h: &Hypothesis, cfg: &ValidityConfig) -> bool {
        let t = &h.theta;
        if 4.0 * t[2] * t[4] - t[3] * t[3] <= 0.0 {
            return false;
        }
        match EllipseGeometry::from_hypothesis(h) {
            Some(g) => g.axis_ratio() <= cfg.ellipse_max_axis_ratio,
            None => false,
        }
    }

    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis {
        let tm = t.blocks[0].homogeneous();
        let q = tm.transpose() * conic_matrix(h) * tm;
        from_conic_matrix(&q).unwrap_or_else(|| h.clone())
    }
}
