use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::{Hypothesis, ModelKind, NormalizationTransform, ProblemModel, ValidityConfig};

/// Quadric surface `[y 1] P [y 1]ᵀ = 0` restricted to circular cylinders.
///
/// Carrier order is `[x², xy, xz, y², yz, z², x, y, z]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cylinder3D;

/// Axis / radius description of a circular cylinder of infinite height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylinderGeometry {
    pub point: [f64; 3],
    /// Unit axis direction.
    pub axis: [f64; 3],
    pub radius: f64,
}

impl CylinderGeometry {
    pub fn to_hypothesis(&self) -> Hypothesis {
        let u = Vector3::from(self.axis).normalize();
        let p0 = Vector3::from(self.point);
        let d = Matrix3::identity() - u * u.transpose();
        let lin = -(d * p0);
        let constant = p0.dot(&(d * p0)) - self.radius * self.radius;
        Hypothesis::new(
            DVector::from_vec(vec![
                d[(0, 0)],
                2.0 * d[(0, 1)],
                2.0 * d[(0, 2)],
                d[(1, 1)],
                2.0 * d[(1, 2)],
                d[(2, 2)],
                2.0 * lin[0],
                2.0 * lin[1],
                2.0 * lin[2],
            ]),
            -constant,
        )
        .expect("cylinder quadric is never zero")
    }

    /// Reads the axis and radius off a quadric, assuming it passed validation.
    pub fn from_hypothesis(h: &Hypothesis) -> Option<Self> {
        let (d, lin, p44) = quadric_blocks(h);
        let eig = d.symmetric_eigen();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        let lam = 0.5 * (eig.eigenvalues[idx[0]] + eig.eigenvalues[idx[1]]);
        if lam == 0.0 {
            return None;
        }
        let mut pinv = Matrix3::zeros();
        for &i in &idx[..2] {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / eig.eigenvalues[i];
        }
        let p0 = -(pinv * lin);
        let r2 = -(p44 - lin.dot(&(pinv * lin))) / lam;
        if !(r2 > 0.0) {
            return None;
        }
        let axis = eig.eigenvectors.column(idx[2]).into_owned();
        Some(Self {
            point: [p0[0], p0[1], p0[2]],
            axis: [axis[0], axis[1], axis[2]],
            radius: r2.sqrt(),
        })
    }

    /// Euclidean distance from `y` to the cylinder surface.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let u = Vector3::from(self.axis).normalize();
        let w = Vector3::new(y[0], y[1], y[2]) - Vector3::from(self.point);
        let radial = w - u * u.dot(&w);
        (radial.norm() - self.radius).abs()
    }
}

/// Splits `(θ, α)` into the 3×3 block `D`, the vector `d` and the constant.
fn quadric_blocks(h: &Hypothesis) -> (Matrix3<f64>, Vector3<f64>, f64) {
    let t = &h.theta;
    let d = Matrix3::new(
        t[0],
        t[1] / 2.0,
        t[2] / 2.0,
        t[1] / 2.0,
        t[3],
        t[4] / 2.0,
        t[2] / 2.0,
        t[4] / 2.0,
        t[5],
    );
    let lin = Vector3::new(t[6] / 2.0, t[7] / 2.0, t[8] / 2.0);
    (d, lin, -h.alpha)
}

fn quadric_matrix(h: &Hypothesis) -> DMatrix<f64> {
    let (d, lin, p44) = quadric_blocks(h);
    let mut p = DMatrix::zeros(4, 4);
    for i in 0..3 {
        for j in 0..3 {
            p[(i, j)] = d[(i, j)];
        }
        p[(i, 3)] = lin[i];
        p[(3, i)] = lin[i];
    }
    p[(3, 3)] = p44;
    p
}

fn from_quadric_matrix(p: &DMatrix<f64>) -> Option<Hypothesis> {
    Hypothesis::new(
        DVector::from_vec(vec![
            p[(0, 0)],
            2.0 * p[(0, 1)],
            2.0 * p[(0, 2)],
            p[(1, 1)],
            2.0 * p[(1, 2)],
            p[(2, 2)],
            2.0 * p[(0, 3)],
            2.0 * p[(1, 3)],
            2.0 * p[(2, 3)],
        ]),
        -p[(3, 3)],
    )
}

impl ProblemModel for Cylinder3D {
    fn kind(&self) -> ModelKind {
        ModelKind::Cylinder3D
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn carrier_dim(&self) -> usize {
        9
    }

    fn coordinate_blocks(&self) -> Vec<Range<usize>> {
        vec![0..3]
    }

    fn carrier(&self, y: &[f64], _c: usize) -> DVector<f64> {
        let (x, v, z) = (y[0], y[1], y[2]);
        DVector::from_vec(vec![x * x, x * v, x * z, v * v, v * z, z * z, x, v, z])
    }

    fn jacobian(&self, y: &[f64], _c: usize) -> DMatrix<f64> {
        let (x, v, z) = (y[0], y[1], y[2]);
        DMatrix::from_row_slice(
            9,
            3,
            &[
                2.0 * x, 0.0, 0.0, //
                v, x, 0.0, //
                z, 0.0, x, //
                0.0, 2.0 * v, 0.0, //
                0.0, z, v, //
                0.0, 0.0, 2.0 * z, //
                1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0,
            ],
        )
    }

    /// A quadric is accepted as a cylinder when the two dominant eigenvalues of
    /// `D` agree in sign and nearly in magnitude, the third nearly vanishes,
    /// `d` lies in the range of `D` and the radius is real.
    fn is_valid(&self, h: &Hypothesis, cfg: &ValidityConfig) -> bool {
        let (d, lin, p44) = quadric_blocks(h);
        let eig = d.symmetric_eigen();
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
        let l1 = eig.eigenvalues[idx[0]];
        let l2 = eig.eigenvalues[idx[1]];
        let l3 = eig.eigenvalues[idx[2]];
        let s1 = l1.abs();
        if s1 == 0.0 || l1.signum() != l2.signum() {
            return false;
        }
        if l3.abs() / s1 >= cfg.cylinder_null_ratio {
            return false;
        }
        if (s1 - l2.abs()) / s1 >= cfg.cylinder_equal_ratio {
            return false;
        }
        // d along the null direction turns the surface into a paraboloid.
        let null_dir = eig.eigenvectors.column(idx[2]);
        let along = null_dir.dot(&lin).abs();
        let reference = lin.norm().max(s1);
        if along > cfg.cylinder_max_angle_deg.to_radians().sin() * reference {
            return false;
        }
        let mut pinv = Matrix3::zeros();
        for &i in &idx[..2] {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / eig.eigenvalues[i];
        }
        let level = p44 - lin.dot(&(pinv * lin));
        level * l1.signum() < 0.0
    }

    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis {
        let tm = t.blocks[0].homogeneous();
        let p = tm.transpose() * quadric_matrix(h) * tm;
        from_quadric_matrix(&p).unwrap_or_else(|| h.clone())
    }
}
