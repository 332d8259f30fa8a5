//! Problem models: carrier lifting, covariance propagation, elemental solves
//! and the normalization that conditions them.
//!
//! Every model maps an input measurement `y ∈ R^l` onto `ζ` carrier vectors
//! `x^[c] ∈ R^m` such that an inlier satisfies `x^[c]ᵀθ − α ≈ 0` for a unit
//! vector `θ`. Nonlinear objective functions become linear in carrier space,
//! at the price of point-dependent (heteroscedastic) carrier covariances
//! `C^[c] = J C_y Jᵀ`.

mod cylinder;
mod ellipse;
mod fundamental;
mod homography;
mod line;
mod normalize;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cylinder::{Cylinder3D, CylinderGeometry};
pub use ellipse::{Ellipse2D, EllipseGeometry};
pub use fundamental::FundamentalMatrix;
pub use homography::Homography;
pub use line::Line2D;
pub use normalize::{denormalize, normalize, BlockTransform, NormalizationTransform};

/// Ratio `σ_second_smallest / σ_largest` of the stacked equation matrix below
/// which an elemental subset is declared rank deficient.
pub const DEGENERACY_RATIO: f64 = 1e-8;

/// One input measurement with an optional unit-determinant covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub y: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

impl DataPoint {
    pub fn new(y: Vec<f64>) -> Self {
        Self { y, covariance: None }
    }

    /// Attaches a covariance. It must be square, symmetric, positive definite
    /// and have unit determinant (the overall scale is what gets estimated).
    pub fn with_covariance(y: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let l = y.len();
        if covariance.nrows() != l || covariance.ncols() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: covariance.nrows(),
            });
        }
        if (&covariance - covariance.transpose()).amax() > 1e-10 * covariance.amax().max(1.0) {
            return Err(Error::InvalidInput("covariance is not symmetric".into()));
        }
        if covariance.clone().cholesky().is_none() {
            return Err(Error::InvalidInput(
                "covariance is not positive definite".into(),
            ));
        }
        let det = covariance.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "covariance must have unit determinant, got {det}"
            )));
        }
        Ok(Self {
            y,
            covariance: Some(covariance),
        })
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn covariance_or_identity(&self) -> DMatrix<f64> {
        self.covariance
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.y.len(), self.y.len()))
    }
}

impl From<Vec<f64>> for DataPoint {
    fn from(y: Vec<f64>) -> Self {
        Self::new(y)
    }
}

/// Carrier vectors of one point together with their Jacobians and
/// first-order covariances (one entry per carrier).
#[derive(Debug, Clone)]
pub struct CarrierBundle {
    pub carriers: Vec<DVector<f64>>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl CarrierBundle {
    pub fn len(&self) -> usize {
        self.carriers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.carriers.is_empty()
    }

    /// `x^[c]ᵀθ`
    #[inline]
    pub fn projection(&self, c: usize, theta: &DVector<f64>) -> f64 {
        self.carriers[c].dot(theta)
    }

    /// `θᵀC^[c]θ`, the variance of the projection up to `σ²`.
    #[inline]
    pub fn projection_variance(&self, c: usize, theta: &DVector<f64>) -> f64 {
        quadratic_form(&self.covariances[c], theta)
    }
}

#[inline]
pub(crate) fn quadratic_form(matrix: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let n = v.len();
    let data = matrix.as_slice();
    let v = v.as_slice();
    let mut total = 0.0;
    for (col, &vc) in v.iter().enumerate() {
        if vc == 0.0 {
            continue;
        }
        let column = &data[col * n..(col + 1) * n];
        let mut acc = 0.0;
        for (row, &vr) in v.iter().enumerate() {
            acc += column[row] * vr;
        }
        total += acc * vc;
    }
    total
}

/// A linear-space hypothesis `x ᵀθ − α = 0` with `‖θ‖ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub theta: DVector<f64>,
    pub alpha: f64,
}

impl Hypothesis {
    /// Builds a hypothesis, rescaling `(θ, α)` so that `‖θ‖ = 1`.
    /// Returns `None` when `θ` vanishes.
    pub fn new(theta: DVector<f64>, alpha: f64) -> Option<Self> {
        let norm = theta.norm();
        if !norm.is_finite() || norm < 1e-300 || !alpha.is_finite() {
            return None;
        }
        Some(Self {
            theta: theta / norm,
            alpha: alpha / norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// The same structure with the opposite sign convention.
    pub fn negated(&self) -> Self {
        Self {
            theta: -&self.theta,
            alpha: -self.alpha,
        }
    }
}

/// Tolerances used by [`validate_hypothesis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityConfig {
    /// Largest accepted major/minor axis ratio for ellipses.
    pub ellipse_max_axis_ratio: f64,
    /// Upper bound on `s₃/s₁` for the quadric block of a cylinder.
    pub cylinder_null_ratio: f64,
    /// Upper bound on `(s₁ − s₂)/s₁` for the quadric block of a cylinder.
    pub cylinder_equal_ratio: f64,
    /// Largest angle (degrees) between `d` and the range of `D`.
    pub cylinder_max_angle_deg: f64,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            ellipse_max_axis_ratio: 10.0,
            cylinder_null_ratio: 0.1,
            cylinder_equal_ratio: 0.3,
            cylinder_max_angle_deg: 5.0,
        }
    }
}

/// Identifies one of the built-in problem models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "line2d")]
    Line2D,
    #[serde(rename = "ellipse2d")]
    Ellipse2D,
    #[serde(rename = "cylinder3d")]
    Cylinder3D,
    #[serde(rename = "fundmat")]
    FundamentalMatrix,
    #[serde(rename = "homography")]
    Homography,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Line2D,
        ModelKind::Ellipse2D,
        ModelKind::Cylinder3D,
        ModelKind::FundamentalMatrix,
        ModelKind::Homography,
    ];

    pub fn model(self) -> &'static dyn ProblemModel {
        match self {
            ModelKind::Line2D => &Line2D,
            ModelKind::Ellipse2D => &Ellipse2D,
            ModelKind::Cylinder3D => &Cylinder3D,
            ModelKind::FundamentalMatrix => &FundamentalMatrix,
            ModelKind::Homography => &Homography,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Line2D => "line2d",
            ModelKind::Ellipse2D => "ellipse2d",
            ModelKind::Cylinder3D => "cylinder3d",
            ModelKind::FundamentalMatrix => "fundmat",
            ModelKind::Homography => "homography",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model '{s}'")))
    }
}

/// The problem-model abstraction shared by all five instantiations.
pub trait ProblemModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// `l`, the input measurement dimension.
    fn input_dim(&self) -> usize;

    /// `m`, the carrier dimension (length of `θ`).
    fn carrier_dim(&self) -> usize;

    /// `ζ`, the number of carrier vectors derived from one point.
    fn carriers_per_point(&self) -> usize {
        1
    }

    /// Whether the model carries a free intercept `α`. Models without one fix `α = 0`.
    fn has_intercept(&self) -> bool {
        true
    }

    /// `m_e`, the number of points in an elemental subset.
    fn elemental_size(&self) -> usize {
        let dof = if self.has_intercept() {
            self.carrier_dim()
        } else {
            self.carrier_dim() - 1
        };
        dof.div_ceil(self.carriers_per_point())
    }

    /// Coordinate blocks normalized independently (one per image or space).
    fn coordinate_blocks(&self) -> Vec<Range<usize>>;

    /// Carrier vector `x^[c]` of measurement `y`.
    fn carrier(&self, y: &[f64], c: usize) -> DVector<f64>;

    /// `m × l` Jacobian of carrier `c` with respect to `y`.
    fn jacobian(&self, y: &[f64], c: usize) -> DMatrix<f64>;

    /// Model-specific admissibility of a hypothesis.
    fn is_valid(&self, _h: &Hypothesis, _cfg: &ValidityConfig) -> bool {
        true
    }

    /// Maps a hypothesis found on normalized data back to original units.
    fn denormalize_hypothesis(&self, h: &Hypothesis, t: &NormalizationTransform) -> Hypothesis;
}

fn check_dim(model: &dyn ProblemModel, y: &[f64]) -> Result<()> {
    if y.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

/// `J C_y Jᵀ`
pub fn carrier_covariance(jacobian: &DMatrix<f64>, c_y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c_y.nrows() != c_y.ncols() || jacobian.ncols() != c_y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: jacobian.ncols(),
            actual: c_y.nrows(),
        });
    }
    Ok(jacobian * c_y * jacobian.transpose())
}

/// Computes the carriers, Jacobians and carrier covariances of one point.
pub fn lift(model: &dyn ProblemModel, point: &DataPoint) -> Result<CarrierBundle> {
    check_dim(model, &point.y)?;
    let zeta = model.carriers_per_point();
    let mut carriers = Vec::with_capacity(zeta);
    let mut jacobians = Vec::with_capacity(zeta);
    let mut covariances = Vec::with_capacity(zeta);
    for c in 0..zeta {
        let j = model.jacobian(&point.y, c);
        let cov = match &point.covariance {
            Some(c_y) => carrier_covariance(&j, c_y)?,
            None => &j * j.transpose(),
        };
        carriers.push(model.carrier(&point.y, c));
        jacobians.push(j);
        covariances.push(cov);
    }
    Ok(CarrierBundle {
        carriers,
        jacobians,
        covariances,
    })
}

pub fn lift_all(model: &dyn ProblemModel, points: &[DataPoint]) -> Result<Vec<CarrierBundle>> {
    points.iter().map(|p| lift(model, p)).collect()
}

/// Checks model-specific admissibility with the default tolerances.
pub fn validate_hypothesis(model: &dyn ProblemModel, h: &Hypothesis) -> bool {
    model.is_valid(h, &ValidityConfig::default())
}

/// Solves an elemental subset given as raw points.
pub fn solve_elemental(model: &dyn ProblemModel, subset: &[DataPoint]) -> Option<Hypothesis> {
    let bundles: Vec<CarrierBundle> = subset
        .iter()
        .map(|p| lift(model, p))
        .collect::<Result<_>>()
        .ok()?;
    let refs: Vec<&CarrierBundle> = bundles.iter().collect();
    solve_elemental_bundles(model, &refs, &ValidityConfig::default())
}

/// Solves an elemental subset from already-lifted carriers.
///
/// Stacks the equations `x^[c]ᵀθ − α = 0`, takes the right singular vector of
/// the smallest singular value and rescales it to `‖θ‖ = 1`. Returns `None`
/// for rank-deficient stacks and for hypotheses the model rejects.
pub fn solve_elemental_bundles(
    model: &dyn ProblemModel,
    subset: &[&CarrierBundle],
    validity: &ValidityConfig,
) -> Option<Hypothesis> {
    let m = model.carrier_dim();
    let intercept = model.has_intercept();
    let unknowns = if intercept { m + 1 } else { m };
    let equations: usize = subset.iter().map(|b| b.len()).sum();
    let rows = equations.max(unknowns);
    let mut a = DMatrix::<f64>::zeros(rows, unknowns);
    let mut r = 0;
    for bundle in subset {
        for x in &bundle.carriers {
            for k in 0..m {
                a[(r, k)] = x[k];
            }
            if intercept {
                a[(r, m)] = -1.0;
            }
            r += 1;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let sv = &svd.singular_values;
    let largest = sv.max();
    if largest <= 0.0 || !largest.is_finite() {
        return None;
    }
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let smallest = order[0];
    if sv.len() < 2 || sv[order[1]] / largest < DEGENERACY_RATIO {
        return None;
    }
    let v = v_t.row(smallest).transpose();
    let theta = DVector::from_iterator(m, v.iter().take(m).copied());
    let alpha = if intercept { v[m] } else { 0.0 };
    if theta.norm() < 1e-10 {
        return None;
    }
    let h = Hypothesis::new(theta, alpha)?;
    model.is_valid(&h, validity).then_some(h)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_point(model: &dyn ProblemModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..model.input_dim())
            .map(|_| rng.random_range(-5.0..5.0))
            .collect()
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Central-difference Jacobian of carrier `c`.
    pub fn finite_difference_jacobian(
        model: &dyn ProblemModel,
        y: &[f64],
        c: usize,
        step: f64,
    ) -> DMatrix<f64> {
        let m = model.carrier_dim();
        let l = model.input_dim();
        let mut out = DMatrix::zeros(m, l);
        for k in 0..l {
            let mut plus = y.to_vec();
            let mut minus = y.to_vec();
            plus[k] += step;
            minus[k] -= step;
            let diff = (model.carrier(&plus, c) - model.carrier(&minus, c)) / (2.0 * step);
            out.set_column(k, &diff);
        }
        out
    }
}
