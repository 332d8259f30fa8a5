//! Structure recovery by one-dimensional mean shift and the final TLS refit.
//!
//! Elemental subsets drawn from the points inside `σ̂` each fix a direction
//! `θ`. All points are projected onto it and mean shift, started at the
//! subset's `α`, climbs the heteroscedastic Epanechnikov density. The highest
//! mode wins; its inliers are the points whose own mean shift ends inside the
//! band around that mode.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{quadratic_form, CarrierBundle, Hypothesis, ProblemModel, ValidityConfig};
use crate::rng::{trial_rng, Stage};
use crate::scale::{draw_hypothesis, mahalanobis, mahalanobis_detail, DENOMINATOR_FLOOR};

pub const MAX_ITERATIONS: usize = 100;

/// Projection `z̃ = x^[c]ᵀθ` and variance `H̃ = θᵀC^[c]θ` of the carrier
/// attaining the worst-case distance.
pub fn projection_and_variance(bundle: &CarrierBundle, h: &Hypothesis) -> (f64, f64) {
    let c = mahalanobis_detail(bundle, h).carrier;
    (
        bundle.projection(c, &h.theta),
        bundle.projection_variance(c, &h.theta).max(DENOMINATOR_FLOOR),
    )
}

/// `B̃ = σ̂² θᵀC̃θ`, floored at `σ̂²·1e-15`.
pub fn bandwidth(bundle: &CarrierBundle, h: &Hypothesis, sigma_hat: f64) -> f64 {
    sigma_hat * sigma_hat * projection_and_variance(bundle, h).1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: f64,
    /// `f̂(z*) = (1/(nσ̂)) Σ κ(u_i)`
    pub density: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Projections sorted for window queries.
#[derive(Debug, Clone)]
pub struct ProjectedSet {
    z: Vec<f64>,
    b: Vec<f64>,
    max_radius: f64,
}

impl ProjectedSet {
    pub fn new(projections: &[f64], bandwidths: &[f64]) -> Self {
        assert_eq!(projections.len(), bandwidths.len());
        let mut idx: Vec<usize> = (0..projections.len()).collect();
        idx.sort_by(|&a, &b| projections[a].total_cmp(&projections[b]).then(a.cmp(&b)));
        let z: Vec<f64> = idx.iter().map(|&i| projections[i]).collect();
        let b: Vec<f64> = idx.iter().map(|&i| bandwidths[i]).collect();
        let max_radius = b.iter().fold(0.0f64, |m, &v| m.max(v.sqrt()));
        Self { z, b, max_radius }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn candidates(&self, z: f64) -> std::ops::Range<usize> {
        let lo = self.z.partition_point(|&v| v < z - self.max_radius);
        let hi = self.z.partition_point(|&v| v <= z + self.max_radius);
        lo..hi
    }

    /// Window mean and `Σ κ(u)` at `z`; `None` for an empty window.
    fn step(&self, z: f64) -> Option<(f64, f64)> {
        let (mut sum, mut count, mut kappa) = (0.0, 0usize, 0.0);
        for i in self.candidates(z) {
            let u = (z - self.z[i]).powi(2) / self.b[i];
            if u <= 1.0 {
                sum += self.z[i];
                count += 1;
                kappa += 1.0 - u;
            }
        }
        (count > 0).then(|| (sum / count as f64, kappa))
    }

    /// `Σ κ(u_i)` at `z`.
    pub fn kernel_sum(&self, z: f64) -> f64 {
        self.step(z).map_or(0.0, |s| s.1)
    }

    /// Flat-profile mean shift from `z0`. `norm` is `n·σ̂`.
    pub fn mean_shift(&self, z0: f64, tol: f64, norm: f64) -> Option<ModeResult> {
        let mut z = z0;
        let (mut next, _) = self.step(z)?;
        let mut iterations = 0;
        let mut converged = false;
        loop {
            if (next - z).abs() <= tol {
                converged = true;
                break;
            }
            if iterations == MAX_ITERATIONS {
                break;
            }
            z = next;
            iterations += 1;
            match self.step(z) {
                Some((n, _)) => next = n,
                None => break,
            }
        }
        Some(ModeResult {
            mode: z,
            density: self.kernel_sum(z) / norm,
            iterations,
            converged,
        })
    }
}

/// Mean shift over explicit projections and bandwidths.
pub fn mean_shift(
    z0: f64,
    projections: &[f64],
    bandwidths: &[f64],
    sigma_hat: f64,
    tol: f64,
) -> Option<ModeResult> {
    let set = ProjectedSet::new(projections, bandwidths);
    set.mean_shift(z0, tol, set.len() as f64 * sigma_hat)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// All points projected onto one hypothesis.
struct Projection {
    z: Vec<f64>,
    h: Vec<f64>,
    set: ProjectedSet,
    tol: f64,
}

impl Projection {
    fn new(bundles: &[CarrierBundle], hyp: &Hypothesis, sigma_hat: f64) -> Self {
        let (z, h): (Vec<f64>, Vec<f64>) = bundles
            .iter()
            .map(|b| projection_and_variance(b, hyp))
            .unzip();
        let s2 = sigma_hat * sigma_hat;
        let bw: Vec<f64> = h.iter().map(|&v| s2 * v).collect();
        let set = ProjectedSet::new(&z, &bw);
        let tol = 1e-6 * sigma_hat * median(&mut h.clone()).sqrt();
        Self { z, h, set, tol }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RecoveryConfig<'a> {
    /// `N`
    pub trials: usize,
    pub seed: u64,
    pub iteration: u64,
    pub validity: &'a ValidityConfig,
    pub max_draws: usize,
}

/// Outcome of the recovery step, indices relative to `bundles`.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub trial: usize,
    /// `θ̂` from the winning subset with `α̂` at its mode.
    pub hypothesis: Hypothesis,
    pub mode: ModeResult,
    pub inliers: Vec<usize>,
}

/// `N` mean-shift trials over subsets of `collected`. Inliers start within
/// `2σ̂·√H̃_i` of the highest mode and converge into the band
/// `|z − α̂| ≤ σ̂·√H̃_i` around it.
pub fn recover_structure(
    model: &dyn ProblemModel,
    bundles: &[CarrierBundle],
    sigma_hat: f64,
    collected: &[usize],
    cfg: &RecoveryConfig<'_>,
) -> Result<Recovery> {
    if collected.len() < model.elemental_size() {
        return Err(Error::StructureNotFound(format!(
            "{} collected points, need {}",
            collected.len(),
            model.elemental_size()
        )));
    }
    let norm = bundles.len() as f64 * sigma_hat;
    let modes: Vec<(usize, Hypothesis, ModeResult)> = (0..cfg.trials)
        .into_par_iter()
        .filter_map(|j| {
            let mut rng = trial_rng(cfg.seed, cfg.iteration, Stage::Recovery, j as u64);
            let h = draw_hypothesis(&mut rng, model, bundles, collected, cfg.validity, cfg.max_draws)?;
            let proj = Projection::new(bundles, &h, sigma_hat);
            let mode = proj.set.mean_shift(h.alpha, proj.tol, norm)?;
            mode.mode.is_finite().then_some((j, h, mode))
        })
        .collect();
    let (trial, h, mode) = modes
        .into_iter()
        .reduce(|a, b| if b.2.density > a.2.density { b } else { a })
        .ok_or_else(|| Error::StructureNotFound("no trial produced a mode".into()))?;
    let hypothesis = Hypothesis {
        theta: h.theta.clone(),
        alpha: mode.mode,
    };
    let proj = Projection::new(bundles, &h, sigma_hat);
    let alpha_hat = mode.mode;
    let inliers: Vec<usize> = (0..bundles.len())
        .into_par_iter()
        .filter(|&i| {
            let band = sigma_hat * proj.h[i].sqrt();
            // the point's own window has to reach the band around the mode
            if (proj.z[i] - alpha_hat).abs() > 2.0 * band {
                return false;
            }
            proj.set
                .mean_shift(proj.z[i], proj.tol, norm)
                .is_some_and(|m| (m.mode - alpha_hat).abs() <= band)
        })
        .collect();
    if inliers.is_empty() {
        return Err(Error::StructureNotFound("no point converged to the mode".into()));
    }
    Ok(Recovery {
        trial,
        hypothesis,
        mode,
        inliers,
    })
}

/// How the refit scale is summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TlsScale {
    /// Largest inlier Mahalanobis distance.
    #[default]
    MaxDistance,
    /// `1.4826 · median` of inlier distances.
    RobustStd,
}

pub const TLS_SWEEPS: usize = 10;
pub const TLS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TlsFit {
    pub hypothesis: Hypothesis,
    pub sweeps: usize,
    /// The scatter was degenerate and the initial estimate was kept.
    pub degenerate: bool,
}

/// Iteratively reweighted TLS over the inlier carriers, started from `init`.
pub fn tls_refit(model: &dyn ProblemModel, bundles: &[&CarrierBundle], init: &Hypothesis) -> TlsFit {
    let m = init.dim();
    let intercept = model.has_intercept();
    let mut current = init.clone();
    let mut sweeps = 0;
    let mut degenerate = false;
    while sweeps < TLS_SWEEPS {
        sweeps += 1;
        let mut total_w = 0.0;
        let mut mean = DVector::<f64>::zeros(m);
        let mut terms: Vec<(f64, &DVector<f64>)> = Vec::new();
        for b in bundles {
            for c in 0..b.len() {
                let v = quadratic_form(&b.covariances[c], &current.theta).max(DENOMINATOR_FLOOR);
                let w = 1.0 / v;
                total_w += w;
                mean.axpy(w, &b.carriers[c], 1.0);
                terms.push((w, &b.carriers[c]));
            }
        }
        if !intercept {
            mean.fill(0.0);
        } else {
            mean /= total_w;
        }
        let mut scatter = DMatrix::<f64>::zeros(m, m);
        for (w, x) in terms {
            let d = x - &mean;
            scatter.ger(w, &d, &d, 1.0);
        }
        let eig = SymmetricEigen::new(scatter);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
        let lmax = eig.eigenvalues[order[m - 1]].abs().max(f64::MIN_POSITIVE);
        if !l0.is_finite() || (l1 - l0) <= 1e-12 * lmax {
            degenerate = true;
            break;
        }
        let mut theta: DVector<f64> = eig.eigenvectors.column(order[0]).into_owned();
        theta /= theta.norm();
        if theta.dot(&current.theta) < 0.0 {
            theta = -theta;
        }
        let alpha = if intercept { theta.dot(&mean) } else { 0.0 };
        let change = (&theta - &current.theta).norm();
        current = Hypothesis { theta, alpha };
        if change < TLS_TOLERANCE {
            break;
        }
    }
    if degenerate && sweeps == 1 {
        current = init.clone();
    }
    TlsFit {
        hypothesis: current,
        sweeps,
        degenerate,
    }
}

/// Refit scale over `bundles` for the chosen summary.
pub fn tls_scale(bundles: &[&CarrierBundle], h: &Hypothesis, kind: TlsScale) -> f64 {
    let mut d: Vec<f64> = bundles.iter().map(|b| mahalanobis(b, h)).collect();
    match kind {
        TlsScale::MaxDistance => d.iter().fold(0.0, |a: f64, &b| a.max(b)),
        TlsScale::RobustStd => 1.4826 * median(&mut d),
    }
}

/// Floor on `σ_tls` before dividing.
pub const EXACT_FIT_SCALE: f64 = 1e-12;

/// `s = n_in / σ_tls`, with `σ_tls` floored at [`EXACT_FIT_SCALE`].
/// The flag reports an exact fit.
pub fn strength(n_in: usize, sigma_tls: f64) -> (f64, bool) {
    if sigma_tls <= EXACT_FIT_SCALE {
        (n_in as f64 / EXACT_FIT_SCALE, true)
    } else {
        (n_in as f64 / sigma_tls, false)
    }
}

/// One recovered structure, in the units of the input data.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureEstimate {
    /// Input indices, ascending.
    pub inliers: Vec<usize>,
    pub theta: DVector<f64>,
    pub alpha: f64,
    pub sigma_tls: f64,
    pub strength: f64,
    /// `σ̂` from scale estimation.
    pub sigma_hat: f64,
    pub iteration: usize,
    pub exact_fit: bool,
    pub weak: bool,
}

impl StructureEstimate {
    pub fn n_in(&self) -> usize {
        self.inliers.len()
    }

    pub fn hypothesis(&self) -> Hypothesis {
        Hypothesis {
            theta: self.theta.clone(),
            alpha: self.alpha,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lift, lift_all, DataPoint, FundamentalMatrix, Line2D};
    use proptest::prelude::*;

    fn line(t: [f64; 2], a: f64) -> Hypothesis {
        Hypothesis::new(DVector::from_vec(t.to_vec()), a).unwrap()
    }

    #[test]
    fn line_bandwidth() {
        let b = lift(&Line2D, &DataPoint::new(vec![3.0, -1.0])).unwrap();
        let h = line([0.6, 0.8], 2.0);
        assert!((bandwidth(&b, &h, 2.0) - 4.0).abs() < 1e-12);
        assert!((bandwidth(&b, &h, 4.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn fundamental_bandwidth_at_origin() {
        let b = lift(&FundamentalMatrix, &DataPoint::new(vec![0.0; 4])).unwrap();
        let h = Hypothesis::new(DVector::from_fn(8, |i, _| (i + 1) as f64), 0.3).unwrap();
        let t = &h.theta;
        let expected = t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + t[3] * t[3];
        assert!((bandwidth(&b, &h, 1.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn symmetric_center() {
        let r = mean_shift(0.9, &[0.0, 1.0, 2.0], &[4.0; 3], 1.0, 1e-9).unwrap();
        assert!((r.mode - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point() {
        let r = mean_shift(4.5, &[5.0], &[1.0], 1.0, 1e-9).unwrap();
        assert_eq!(r.mode, 5.0);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn window_excludes_far_point() {
        let r = mean_shift(0.1, &[0.0, 0.1, 0.2, 5.0], &[0.09; 4], 0.3, 1e-9).unwrap();
        assert!((r.mode - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_window_is_none() {
        assert!(mean_shift(10.0, &[0.0, 1.0], &[0.25; 2], 0.5, 1e-9).is_none());
    }

    #[test]
    fn tls_symmetric_cross() {
        let pts: Vec<DataPoint> = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, -1.0]]
            .iter()
            .map(|p| DataPoint::new(p.to_vec()))
            .collect();
        let bundles = lift_all(&Line2D, &pts).unwrap();
        let refs: Vec<&CarrierBundle> = bundles.iter().collect();
        let fit = tls_refit(&Line2D, &refs, &line([0.0, 1.0], 0.0));
        assert!((fit.hypothesis.theta[0]).abs() < 1e-12);
        assert!(fit.hypothesis.alpha.abs() < 1e-12);
        assert_eq!(tls_scale(&refs, &fit.hypothesis, TlsScale::MaxDistance), 1.0);
    }

    #[test]
    fn tls_matches_orthogonal_regression() {
        let mut rng = crate::model::test_support::rng(11);
        use rand::Rng;
        let pts: Vec<DataPoint> = (0..40)
            .map(|_| {
                let t: f64 = rng.random_range(-10.0..10.0);
                DataPoint::new(vec![t + rng.random_range(-0.3..0.3), 0.5 * t + 2.0 + rng.random_range(-0.3..0.3)])
            })
            .collect();
        let bundles = lift_all(&Line2D, &pts).unwrap();
        let refs: Vec<&CarrierBundle> = bundles.iter().collect();
        let fit = tls_refit(&Line2D, &refs, &line([0.5, -1.0], -2.0));
        // closed form: normal is the minor principal axis of the centred scatter
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.y[0]).sum::<f64>() / n,
            pts.iter().map(|p| p.y[1]).sum::<f64>() / n,
        );
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in &pts {
            let (dx, dy) = (p.y[0] - mx, p.y[1] - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let phi = 0.5 * (2.0 * sxy).atan2(sxx - syy) + std::f64::consts::FRAC_PI_2;
        let mut normal = [phi.cos(), phi.sin()];
        if normal[0] * fit.hypothesis.theta[0] + normal[1] * fit.hypothesis.theta[1] < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        assert!((fit.hypothesis.theta[0] - normal[0]).abs() < 1e-9);
        assert!((fit.hypothesis.theta[1] - normal[1]).abs() < 1e-9);
        assert!((fit.hypothesis.alpha - (normal[0] * mx + normal[1] * my)).abs() < 1e-9);
    }

    #[test]
    fn strength_values() {
        assert_eq!(strength(321, 9.6).0, 33.4375);
        let (s, exact) = strength(407, 0.56);
        assert!((s - 726.7857142857143).abs() < 1e-9 && !exact);
        assert!(strength(10, 0.0).1);
    }

    fn grid_argmax(z: &[f64], b: f64) -> (f64, f64) {
        let r = b.sqrt();
        let lo = z.iter().cloned().fold(f64::INFINITY, f64::min) - r;
        let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + r;
        let step = 1e-4 * (hi - lo);
        let mut best = (lo, -1.0);
        let mut k = 0;
        loop {
            let x = lo + k as f64 * step;
            if x > hi {
                break;
            }
            let f: f64 = z.iter().map(|&zi| (1.0 - (x - zi).powi(2) / b).max(0.0)).sum();
            if f > best.1 {
                best = (x, f);
            }
            k += 1;
        }
        (best.0, step)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn mode_matches_grid_argmax(
            z in proptest::collection::vec(-10.0f64..10.0, 2..=50),
            bw in 0.2f64..4.0,
        ) {
            let b = vec![bw; z.len()];
            let (peak, step) = grid_argmax(&z, bw);
            let r = mean_shift(peak, &z, &b, 1.0, 1e-12).unwrap();
            prop_assert!((r.mode - peak).abs() <= step, "{} vs {}", r.mode, peak);
        }

        #[test]
        fn density_rises_along_iterates(
            z in proptest::collection::vec(-10.0f64..10.0, 2..=50),
            bw in 0.2f64..4.0,
            start in 0usize..50,
        ) {
            let set = ProjectedSet::new(&z, &vec![bw; z.len()]);
            let mut x = z[start % z.len()];
            let mut f = set.kernel_sum(x);
            for _ in 0..MAX_ITERATIONS {
                let Some((next, _)) = set.step(x) else { break };
                let fnext = set.kernel_sum(next);
                prop_assert!(fnext >= f - 1e-9 * f.abs().max(1.0));
                if (next - x).abs() < 1e-14 { break; }
                x = next;
                f = fnext;
            }
        }

        #[test]
        fn fixed_point_on_return(
            z in proptest::collection::vec(-10.0f64..10.0, 2..=50),
            bw in 0.2f64..4.0,
            sigma in 0.1f64..3.0,
        ) {
            let b = vec![bw; z.len()];
            let tol = 1e-6 * sigma;
            let r = mean_shift(z[0], &z, &b, sigma, tol).unwrap();
            if r.converged {
                let set = ProjectedSet::new(&z, &b);
                let (next, _) = set.step(r.mode).unwrap();
                prop_assert!((next - r.mode).abs() <= tol);
            }
        }
    }
}
