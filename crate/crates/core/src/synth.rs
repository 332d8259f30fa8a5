//! Synthetic scenes with ground truth.
//!
//! A [`SceneSpec`] lists the structures of one model kind, their inlier counts
//! and noise, and a count of outliers spread uniformly over the domain. The
//! named presets reproduce the standard test scenes.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CylinderGeometry, DataPoint, EllipseGeometry, FundamentalMatrix, Homography, Hypothesis, ModelKind,
};
use crate::rng::{trial_rng, Stage};

/// Label of a point that belongs to no structure.
pub const OUTLIER: i64 = -1;

/// Axis-aligned box. For correspondence models a two-dimensional box applies
/// to both images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Bounds {
    pub fn square(side: f64) -> Self {
        Self {
            min: vec![0.0; 2],
            max: vec![side; 2],
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(k, &v)| v >= self.min[k % self.min.len()] && v <= self.max[k % self.max.len()])
    }

    fn sample(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|k| {
                let (lo, hi) = (self.min[k % self.min.len()], self.max[k % self.max.len()]);
                rng.random_range(lo..=hi)
            })
            .collect()
    }

    fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }
}

fn default_focal() -> f64 {
    600.0
}

/// Pinhole intrinsics shared by both views of a correspondence scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    #[serde(default = "default_focal")]
    pub focal: f64,
    /// Defaults to the centre of the bounds.
    #[serde(default)]
    pub principal: Option<[f64; 2]>,
}

/// Geometry of one generated structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Geometry {
    /// Straight segment between two points.
    Segment { start: [f64; 2], end: [f64; 2] },
    /// Full-domain chord `n·(p − c) = offset` with normal angle in degrees
    /// and `c` the domain centre.
    Chord { normal_angle_deg: f64, offset: f64 },
    /// Chord at an orientation and offset drawn from the scene seed.
    RandomChord,
    Ellipse {
        center: [f64; 2],
        semi_major: f64,
        semi_minor: f64,
        angle_deg: f64,
    },
    /// Finite cylinder; a missing axis is drawn uniformly on the sphere.
    Cylinder {
        point: [f64; 3],
        #[serde(default)]
        axis: Option<[f64; 3]>,
        radius: f64,
        length: f64,
    },
    /// Plane seen in two views: first-view points uniform in `region`,
    /// mapped by the row-major `matrix`.
    Homography { matrix: [[f64; 3]; 3], region: Bounds },
    /// Rigid object moving between views: first-view pixels uniform in
    /// `region` at depths in `depth`, displaced by the rotation (XYZ Euler
    /// angles, degrees) and translation.
    RigidMotion {
        region: Bounds,
        depth: [f64; 2],
        rotation_deg: [f64; 3],
        translation: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub inliers: usize,
    /// Per-coordinate standard deviation of the Gaussian noise.
    pub noise: f64,
    pub geometry: Geometry,
}

fn default_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub model: ModelKind,
    /// Domain of inliers and outliers. Cylinder scenes may omit it and use
    /// the inlier bounding box inflated by `outlier_margin`.
    #[serde(default)]
    pub bounds: Option<Bounds>,
    pub structures: Vec<StructureSpec>,
    pub outliers: usize,
    #[serde(default = "default_margin")]
    pub outlier_margin: f64,
    #[serde(default)]
    pub intrinsics: Option<Intrinsics>,
}

/// Generated points with per-point labels and the true hypotheses.
#[derive(Debug, Clone)]
pub struct Scene {
    pub points: Vec<DataPoint>,
    /// Structure index, or [`OUTLIER`].
    pub labels: Vec<i64>,
    pub truths: Vec<Hypothesis>,
}

impl Scene {
    pub fn counts(&self) -> Vec<usize> {
        let k = self.truths.len();
        let mut c = vec![0; k];
        for &l in &self.labels {
            if l >= 0 {
                c[l as usize] += 1;
            }
        }
        c
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn chord_from(bounds: &Bounds, phi: f64, offset: f64) -> Result<([f64; 2], [f64; 2])> {
    let c = bounds.center();
    let n = [phi.cos(), phi.sin()];
    let dir = [-n[1], n[0]];
    let p0 = [c[0] + offset * n[0], c[1] + offset * n[1]];
    // Clip p0 + t·dir against the box.
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if dir[k].abs() < 1e-12 {
            if p0[k] < bounds.min[k] || p0[k] > bounds.max[k] {
                return Err(invalid("chord misses the domain"));
            }
            continue;
        }
        let a = (bounds.min[k] - p0[k]) / dir[k];
        let b = (bounds.max[k] - p0[k]) / dir[k];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if !(hi > lo) {
        return Err(invalid("chord misses the domain"));
    }
    Ok((
        [p0[0] + lo * dir[0], p0[1] + lo * dir[1]],
        [p0[0] + hi * dir[0], p0[1] + hi * dir[1]],
    ))
}

fn line_truth(a: [f64; 2], b: [f64; 2]) -> Result<Hypothesis> {
    let n = nalgebra::DVector::from_vec(vec![b[1] - a[1], a[0] - b[0]]);
    let alpha = n[0] * a[0] + n[1] * a[1];
    Hypothesis::new(n, alpha).ok_or_else(|| invalid("segment has zero length"))
}

fn orthonormal_basis(u: Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = u.cross(&helper).normalize();
    (e1, u.cross(&e1))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

const MAX_REJECTIONS: usize = 1000;

struct Generated {
    clean: Vec<Vec<f64>>,
    truth: Hypothesis,
}

fn intrinsics_matrix(spec: &SceneSpec, bounds: &Bounds) -> Matrix3<f64> {
    let intr = spec.intrinsics.clone().unwrap_or(Intrinsics {
        focal: default_focal(),
        principal: None,
    });
    let c = intr.principal.unwrap_or_else(|| bounds.center());
    Matrix3::new(intr.focal, 0.0, c[0], 0.0, intr.focal, c[1], 0.0, 0.0, 1.0)
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

fn generate_structure(
    spec: &SceneSpec,
    s: &StructureSpec,
    bounds: Option<&Bounds>,
    rng: &mut ChaCha8Rng,
) -> Result<Generated> {
    let need_bounds = || bounds.ok_or_else(|| invalid("scene needs bounds"));
    let n = s.inliers;
    match (&s.geometry, spec.model) {
        (Geometry::Segment { .. } | Geometry::Chord { .. } | Geometry::RandomChord, ModelKind::Line2D) => {
            let b = need_bounds()?;
            let (p, q) = match s.geometry {
                Geometry::Segment { start, end } => (start, end),
                Geometry::Chord {
                    normal_angle_deg,
                    offset,
                } => chord_from(b, normal_angle_deg.to_radians(), offset)?,
                _ => {
                    let half = 0.5 * (b.max[0] - b.min[0]).min(b.max[1] - b.min[1]);
                    let phi = rng.random_range(0.0..std::f64::consts::PI);
                    let offset = rng.random_range(-0.8 * half..0.8 * half);
                    chord_from(b, phi, offset)?
                }
            };
            if !b.contains(&p) || !b.contains(&q) {
                return Err(invalid("segment leaves the domain"));
            }
            let clean = (0..n)
                .map(|_| {
                    let t: f64 = rng.random();
                    vec![p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
                })
                .collect();
            Ok(Generated {
                clean,
                truth: line_truth(p, q)?,
            })
        }
        (
            Geometry::Ellipse {
                center,
                semi_major,
                semi_minor,
                angle_deg,
            },
            ModelKind::Ellipse2D,
        ) => {
            let b = need_bounds()?;
            if !(*semi_minor > 0.0 && semi_major >= semi_minor) {
                return Err(invalid("ellipse needs semi_major >= semi_minor > 0"));
            }
            let g = EllipseGeometry {
                center: *center,
                semi_major: *semi_major,
                semi_minor: *semi_minor,
                angle: angle_deg.to_radians(),
            };
            let (sa, ca) = g.angle.sin_cos();
            let ex = (semi_major * ca).hypot(semi_minor * sa);
            let ey = (semi_major * sa).hypot(semi_minor * ca);
            if !b.contains(&[center[0] - ex, center[1] - ey]) || !b.contains(&[center[0] + ex, center[1] + ey]) {
                return Err(invalid("ellipse leaves the domain"));
            }
            // Uniform in arclength by rejection on the parametric speed.
            let mut clean = Vec::with_capacity(n);
            while clean.len() < n {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = (semi_major * t.sin()).hypot(semi_minor * t.cos());
                if rng.random::<f64>() * semi_major <= speed {
                    clean.push(g.point_at(t).to_vec());
                }
            }
            Ok(Generated {
                clean,
                truth: g.to_hypothesis(),
            })
        }
        (
            Geometry::Cylinder {
                point,
                axis,
                radius,
                length,
            },
            ModelKind::Cylinder3D,
        ) => {
            if !(*radius > 0.0 && *length > 0.0) {
                return Err(invalid("cylinder needs positive radius and length"));
            }
            let u = match axis {
                Some(a) => {
                    let v = Vector3::from(*a);
                    if v.norm() < 1e-12 {
                        return Err(invalid("cylinder axis is zero"));
                    }
                    v.normalize()
                }
                None => random_unit(rng),
            };
            let (e1, e2) = orthonormal_basis(u);
            let p0 = Vector3::from(*point);
            let clean: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    let h = rng.random_range(-0.5 * length..=0.5 * length);
                    let p = p0 + u * h + (e1 * phi.cos() + e2 * phi.sin()) * *radius;
                    vec![p.x, p.y, p.z]
                })
                .collect();
            if let Some(b) = bounds {
                if !clean.iter().all(|p| b.contains(p)) {
                    return Err(invalid("cylinder leaves the domain"));
                }
            }
            let truth = CylinderGeometry {
                point: *point,
                axis: [u.x, u.y, u.z],
                radius: *radius,
            }
            .to_hypothesis();
            Ok(Generated { clean, truth })
        }
        (Geometry::Homography { matrix, region }, ModelKind::Homography) => {
            let b = need_bounds()?;
            let m = Matrix3::from_fn(|r, c| matrix[r][c]);
            let mut clean = Vec::with_capacity(n);
            let mut rejected = 0;
            while clean.len() < n {
                let p = region.sample(rng, 2);
                let q = Homography::transfer(&m, p[0], p[1]);
                if b.contains(&p) && b.contains(&q) && q.iter().all(|v| v.is_finite()) {
                    clean.push(vec![p[0], p[1], q[0], q[1]]);
                } else {
                    rejected += 1;
                    if rejected > MAX_REJECTIONS * n.max(1) {
                        return Err(invalid("homography maps the region outside the domain"));
                    }
                }
            }
            let truth = Homography::from_matrix(&m).ok_or_else(|| invalid("homography is zero"))?;
            Ok(Generated { clean, truth })
        }
        (
            Geometry::RigidMotion {
                region,
                depth,
                rotation_deg,
                translation,
            },
            ModelKind::FundamentalMatrix,
        ) => {
            let b = need_bounds()?;
            if !(depth[0] > 0.0 && depth[1] >= depth[0]) {
                return Err(invalid("depth range must be positive"));
            }
            let k = intrinsics_matrix(spec, b);
            let k_inv = k.try_inverse().ok_or_else(|| invalid("singular intrinsics"))?;
            let r = Rotation3::from_euler_angles(
                rotation_deg[0].to_radians(),
                rotation_deg[1].to_radians(),
                rotation_deg[2].to_radians(),
            )
            .into_inner();
            let t = Vector3::from(*translation);
            if t.norm() < 1e-12 {
                return Err(invalid("rigid motion needs a translation"));
            }
            let mut clean = Vec::with_capacity(n);
            let mut rejected = 0;
            while clean.len() < n {
                let p = region.sample(rng, 2);
                let z = rng.random_range(depth[0]..=depth[1]);
                let x = k_inv * Vector3::new(p[0], p[1], 1.0) * z;
                let y = k * (r * x + t);
                let q = [y.x / y.z, y.y / y.z];
                if y.z > 0.0 && b.contains(&p) && b.contains(&q) {
                    clean.push(vec![p[0], p[1], q[0], q[1]]);
                } else {
                    rejected += 1;
                    if rejected > MAX_REJECTIONS * n.max(1) {
                        return Err(invalid("rigid motion sends the region outside the domain"));
                    }
                }
            }
            let f = k_inv.transpose() * skew(&t) * r * k_inv;
            let truth = FundamentalMatrix::from_matrix(&f).ok_or_else(|| invalid("degenerate motion"))?;
            Ok(Generated { clean, truth })
        }
        (g, m) => Err(invalid(format!("geometry {g:?} does not fit model {m}"))),
    }
}

/// Generates the scene; bit-identical for the same spec and seed.
pub fn generate(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    let l = spec.model.model().input_dim();
    if let Some(b) = &spec.bounds {
        let ok_len = |v: &Vec<f64>| v.len() == l || (v.len() == 2 && l == 4);
        if !ok_len(&b.min) || !ok_len(&b.max) || b.min.iter().zip(&b.max).any(|(a, c)| !(a < c)) {
            return Err(invalid("bounds do not match the model dimension"));
        }
    } else if spec.model != ModelKind::Cylinder3D {
        return Err(invalid("scene needs bounds"));
    }
    if spec.structures.iter().any(|s| !(s.noise >= 0.0 && s.noise.is_finite())) {
        return Err(invalid("noise must be a non-negative number"));
    }
    let mut rng = trial_rng(seed, 0, Stage::Synthesis, 0);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut truths = Vec::new();
    let mut clean_all = Vec::new();
    for (k, s) in spec.structures.iter().enumerate() {
        let g = generate_structure(spec, s, spec.bounds.as_ref(), &mut rng)?;
        let noise = Normal::new(0.0, s.noise).map_err(|e| invalid(e.to_string()))?;
        for c in &g.clean {
            clean_all.push(c.clone());
            let y: Vec<f64> = c.iter().map(|&v| v + noise.sample(&mut rng)).collect();
            points.push(DataPoint::new(y));
            labels.push(k as i64);
        }
        truths.push(g.truth);
    }
    let outlier_bounds = match &spec.bounds {
        Some(b) => b.clone(),
        None => {
            if clean_all.is_empty() {
                return Err(invalid("cylinder scene without structures needs bounds"));
            }
            let mut lo = vec![f64::INFINITY; l];
            let mut hi = vec![f64::NEG_INFINITY; l];
            for p in &clean_all {
                for k in 0..l {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            for k in 0..l {
                let pad = 0.5 * spec.outlier_margin * (hi[k] - lo[k]);
                lo[k] -= pad;
                hi[k] += pad;
            }
            Bounds { min: lo, max: hi }
        }
    };
    for _ in 0..spec.outliers {
        points.push(DataPoint::new(outlier_bounds.sample(&mut rng, l)));
        labels.push(OUTLIER);
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let points = order.iter().map(|&i| points[i].clone()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Ok(Scene { points, labels, truths })
}

/// Named scene presets.
pub const SCENARIOS: [&str; 8] = [
    "lines1",
    "lines2",
    "ellipses1",
    "ellipses2",
    "circles-fig2",
    "cylinders",
    "homography-synth",
    "fundmat-synth",
];

fn chord(n: usize, noise: f64, angle: f64, offset: f64) -> StructureSpec {
    StructureSpec {
        inliers: n,
        noise,
        geometry: Geometry::Chord {
            normal_angle_deg: angle,
            offset,
        },
    }
}

fn ellipse(n: usize, noise: f64, center: [f64; 2], a: f64, b: f64, angle: f64) -> StructureSpec {
    StructureSpec {
        inliers: n,
        noise,
        geometry: Geometry::Ellipse {
            center,
            semi_major: a,
            semi_minor: b,
            angle_deg: angle,
        },
    }
}

fn five_lines(outliers: usize) -> SceneSpec {
    SceneSpec {
        model: ModelKind::Line2D,
        bounds: Some(Bounds::square(700.0)),
        structures: vec![
            chord(300, 3.0, 15.0, -180.0),
            chord(250, 6.0, 70.0, 120.0),
            chord(200, 9.0, 125.0, -60.0),
            chord(150, 12.0, 160.0, 170.0),
            chord(100, 15.0, 95.0, -200.0),
        ],
        outliers,
        outlier_margin: default_margin(),
        intrinsics: None,
    }
}

fn three_ellipses(outliers: usize) -> SceneSpec {
    SceneSpec {
        model: ModelKind::Ellipse2D,
        bounds: Some(Bounds::square(700.0)),
        structures: vec![
            ellipse(300, 3.0, [220.0, 250.0], 150.0, 90.0, 20.0),
            ellipse(250, 6.0, [480.0, 470.0], 140.0, 100.0, -35.0),
            ellipse(200, 9.0, [530.0, 170.0], 100.0, 60.0, 70.0),
        ],
        outliers,
        outlier_margin: default_margin(),
        intrinsics: None,
    }
}

/// Spec of a named preset.
pub fn preset(name: &str) -> Result<SceneSpec> {
    let spec = match name {
        "lines1" => five_lines(350),
        "lines2" => five_lines(500),
        "ellipses1" => three_ellipses(350),
        "ellipses2" => three_ellipses(800),
        "circles-fig2" => SceneSpec {
            model: ModelKind::Ellipse2D,
            bounds: Some(Bounds::square(700.0)),
            structures: vec![
                ellipse(200, 5.0, [260.0, 300.0], 160.0, 110.0, 10.0),
                ellipse(200, 10.0, [440.0, 420.0], 180.0, 120.0, 35.0),
            ],
            outliers: 200,
            outlier_margin: default_margin(),
            intrinsics: None,
        },
        "cylinders" => SceneSpec {
            model: ModelKind::Cylinder3D,
            bounds: None,
            structures: vec![
                StructureSpec {
                    inliers: 400,
                    noise: 0.06,
                    geometry: Geometry::Cylinder {
                        point: [-6.0, 0.0, 0.0],
                        axis: None,
                        radius: 2.0,
                        length: 10.0,
                    },
                },
                StructureSpec {
                    inliers: 300,
                    noise: 0.1,
                    geometry: Geometry::Cylinder {
                        point: [6.0, 0.0, 0.0],
                        axis: None,
                        radius: 3.0,
                        length: 10.0,
                    },
                },
            ],
            outliers: 500,
            outlier_margin: default_margin(),
            intrinsics: None,
        },
        "homography-synth" => {
            let region = |x0: f64, x1: f64| Bounds {
                min: vec![x0, 100.0],
                max: vec![x1, 600.0],
            };
            SceneSpec {
                model: ModelKind::Homography,
                bounds: Some(Bounds::square(700.0)),
                structures: vec![
                    StructureSpec {
                        inliers: 200,
                        noise: 1.0,
                        geometry: Geometry::Homography {
                            matrix: [[1.05, 0.02, 25.0], [-0.03, 1.0, 10.0], [1e-5, 2e-5, 1.0]],
                            region: region(50.0, 300.0),
                        },
                    },
                    StructureSpec {
                        inliers: 200,
                        noise: 1.0,
                        geometry: Geometry::Homography {
                            matrix: [[0.95, -0.08, -20.0], [0.06, 0.97, 30.0], [-3e-5, 1e-5, 1.0]],
                            region: region(400.0, 650.0),
                        },
                    },
                ],
                outliers: 200,
                outlier_margin: default_margin(),
                intrinsics: None,
            }
        }
        "fundmat-synth" => {
            let region = |x0: f64, x1: f64| Bounds {
                min: vec![x0, 80.0],
                max: vec![x1, 620.0],
            };
            SceneSpec {
                model: ModelKind::FundamentalMatrix,
                bounds: Some(Bounds::square(700.0)),
                structures: vec![
                    StructureSpec {
                        inliers: 200,
                        noise: 0.5,
                        geometry: Geometry::RigidMotion {
                            region: region(50.0, 320.0),
                            depth: [8.0, 12.0],
                            rotation_deg: [2.0, -3.0, 1.0],
                            translation: [0.5, 0.1, 0.05],
                        },
                    },
                    StructureSpec {
                        inliers: 200,
                        noise: 0.5,
                        geometry: Geometry::RigidMotion {
                            region: region(380.0, 650.0),
                            depth: [6.0, 10.0],
                            rotation_deg: [-1.0, 4.0, -2.0],
                            translation: [-0.3, 0.2, 0.1],
                        },
                    },
                ],
                outliers: 200,
                outlier_margin: default_margin(),
                intrinsics: Some(Intrinsics {
                    focal: default_focal(),
                    principal: None,
                }),
            }
        }
        other => return Err(invalid(format!("unknown scenario '{other}'"))),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lift;
    use crate::scale::mahalanobis;

    #[test]
    fn preset_counts() {
        let rows = |name: &str| generate(&preset(name).unwrap(), 1).unwrap().points.len();
        assert_eq!(rows("lines1"), 1350);
        assert_eq!(rows("lines2"), 1500);
        assert_eq!(rows("circles-fig2"), 600);
        assert_eq!(rows("ellipses1"), 1100);
        assert_eq!(rows("cylinders"), 1200);
        assert_eq!(rows("homography-synth"), 600);
        assert_eq!(rows("fundmat-synth"), 600);
    }

    #[test]
    fn labels_match_spec() {
        for name in SCENARIOS {
            let spec = preset(name).unwrap();
            let scene = generate(&spec, 3).unwrap();
            let expected: Vec<usize> = spec.structures.iter().map(|s| s.inliers).collect();
            assert_eq!(scene.counts(), expected, "{name}");
            assert_eq!(scene.labels.iter().filter(|&&l| l == OUTLIER).count(), spec.outliers);
        }
    }

    #[test]
    fn reproducible() {
        for name in SCENARIOS {
            let spec = preset(name).unwrap();
            let a = generate(&spec, 9).unwrap();
            let b = generate(&spec, 9).unwrap();
            let c = generate(&spec, 10).unwrap();
            assert_eq!(a.points, b.points);
            assert_eq!(a.labels, b.labels);
            assert_ne!(a.points, c.points);
        }
    }

    #[test]
    fn noise_free_points_lie_on_truth() {
        for name in SCENARIOS {
            let mut spec = preset(name).unwrap();
            spec.structures.iter_mut().for_each(|s| s.noise = 0.0);
            let scene = generate(&spec, 4).unwrap();
            let model = spec.model.model();
            for (p, &l) in scene.points.iter().zip(&scene.labels) {
                if l >= 0 {
                    let b = lift(model, p).unwrap();
                    let d = mahalanobis(&b, &scene.truths[l as usize]);
                    assert!(d < 1e-6, "{name}: {d}");
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_domain_structure() {
        let spec = SceneSpec {
            model: ModelKind::Ellipse2D,
            bounds: Some(Bounds::square(100.0)),
            structures: vec![ellipse(10, 1.0, [50.0, 50.0], 80.0, 20.0, 0.0)],
            outliers: 0,
            outlier_margin: 0.2,
            intrinsics: None,
        };
        assert!(matches!(generate(&spec, 0), Err(Error::InvalidSpec(_))));
        assert!(preset("nope").is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = preset("fundmat-synth").unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: SceneSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }
}
