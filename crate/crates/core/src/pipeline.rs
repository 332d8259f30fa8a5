//! The outer estimation loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_shift::{recover_structure, strength, tls_refit, tls_scale, RecoveryConfig, TlsScale};
use crate::model::{denormalize, lift_all, CarrierBundle, DataPoint, NormalizationTransform, ProblemModel, ValidityConfig};
use crate::scale::{best_trial, estimate_scale, initial_set_size, ExpansionAverage, ScaleConfig, TrialSampling};

pub use crate::mean_shift::StructureEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// `M`, elemental subsets for scale estimation.
    pub trials: usize,
    /// `ε`, percent of the remaining points in the initial set.
    pub epsilon: f64,
    /// Density ratio that stops expansion.
    pub threshold: f64,
    /// `N`; defaults to `max(round(M/10), 50)`.
    pub recovery_trials: Option<usize>,
    /// Largest segment-width rank, percent.
    pub rank_cap: f64,
    pub seed: u64,
    pub normalize: bool,
    pub expansion_average: ExpansionAverage,
    pub tls_scale: TlsScale,
    pub validity: ValidityConfig,
    /// Draws per trial before a trial is abandoned as degenerate.
    pub max_draws_per_trial: usize,
    /// Lower bound on `σ̂` in normalized units.
    pub min_scale: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            epsilon: 5.0,
            threshold: 0.5,
            recovery_trials: None,
            rank_cap: 50.0,
            seed: 0,
            normalize: true,
            expansion_average: ExpansionAverage::default(),
            tls_scale: TlsScale::default(),
            validity: ValidityConfig::default(),
            max_draws_per_trial: 100,
            min_scale: 1e-9,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 50.0) {
            return Err(Error::InvalidInput("epsilon must lie in (0, 50)".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidInput("threshold must lie in (0, 1)".into()));
        }
        if !(self.rank_cap >= self.epsilon && self.rank_cap <= 100.0) {
            return Err(Error::InvalidInput("rank cap must lie in [epsilon, 100]".into()));
        }
        if self.recovery_trials == Some(0) || self.max_draws_per_trial == 0 {
            return Err(Error::InvalidInput("trial counts must be at least 1".into()));
        }
        Ok(())
    }

    /// `N`
    pub fn recovery_trial_count(&self) -> usize {
        self.recovery_trials
            .unwrap_or_else(|| ((self.trials as f64 / 10.0).round() as usize).max(50))
    }

    pub fn scale_config(&self) -> ScaleConfig {
        ScaleConfig {
            epsilon: self.epsilon,
            threshold: self.threshold,
            rank_cap: self.rank_cap,
            average: self.expansion_average,
            min_scale: self.min_scale,
        }
    }
}

/// Why the loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Fewer points remain than an iteration needs.
    TooFewPoints,
    /// Two consecutive iterations produced no structure.
    RecoveryFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub remaining: usize,
    pub n_eps: usize,
    /// Winning scale trial, if any trial succeeded.
    pub scale_trial: Option<usize>,
    /// `σ̂` in normalized Mahalanobis units.
    pub sigma_hat_normalized: Option<f64>,
    /// Percent range of the region of interest.
    pub region: Option<(f64, f64)>,
    pub weak: bool,
    pub collected: usize,
    /// `k_t` for each segment-width rank.
    pub stops: Vec<usize>,
    pub recovery_trial: Option<usize>,
    pub mode_density: Option<f64>,
    pub n_in: usize,
    /// A carrier variance hit the denominator floor in the winning trial.
    pub clamped: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    /// Sorted by strength, descending; ties keep discovery order.
    pub structures: Vec<StructureEstimate>,
    /// Input indices left unclassified, ascending.
    pub unclassified: Vec<usize>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub termination: Termination,
}

impl EstimationResult {
    /// Position after which the strength ratio between neighbours is largest.
    /// Only a hint for where inlier structures end.
    pub fn largest_strength_gap(&self) -> Option<usize> {
        let s: Vec<f64> = self.structures.iter().map(|s| s.strength).collect();
        (1..s.len())
            .map(|k| (k, s[k - 1] / s[k].max(f64::MIN_POSITIVE)))
            .fold(None, |best: Option<(usize, f64)>, (k, r)| match best {
                Some((_, b)) if b >= r => best,
                _ => Some((k, r)),
            })
            .map(|(k, _)| k)
    }
}

fn sort_and_finish(
    mut structures: Vec<StructureEstimate>,
    mut unclassified: Vec<usize>,
    diagnostics: Vec<IterationDiagnostics>,
    termination: Termination,
) -> EstimationResult {
    structures.sort_by(|a, b| b.strength.total_cmp(&a.strength));
    unclassified.sort_unstable();
    EstimationResult {
        structures,
        unclassified,
        diagnostics,
        termination,
    }
}

/// Runs scale estimation and recovery until the data are exhausted.
pub fn run(points: &[DataPoint], model: &dyn ProblemModel, config: &EstimatorConfig) -> Result<EstimationResult> {
    config.validate()?;
    let originals = lift_all(model, points)?;
    let m_e = model.elemental_size();
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut structures = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failures = 0;
    let scale_cfg = config.scale_config();

    for iteration in 0.. {
        let n = remaining.len();
        let n_eps = match initial_set_size(n, config.epsilon, m_e) {
            Ok(v) if iteration == 0 || n >= 10 * m_e => v,
            Err(e) if iteration == 0 => return Err(e),
            _ => {
                return Ok(sort_and_finish(structures, remaining, diagnostics, Termination::TooFewPoints));
            }
        };
        let mut diag = IterationDiagnostics {
            iteration,
            remaining: n,
            n_eps,
            scale_trial: None,
            sigma_hat_normalized: None,
            region: None,
            weak: false,
            collected: 0,
            stops: Vec::new(),
            recovery_trial: None,
            mode_density: None,
            n_in: 0,
            clamped: false,
            failure: None,
        };
        match iterate(points, &originals, &remaining, model, config, &scale_cfg, iteration, n_eps, &mut diag) {
            Ok(s) => {
                failures = 0;
                diag.n_in = s.inliers.len();
                let mut taken = s.inliers.iter().peekable();
                remaining.retain(|i| {
                    while taken.peek().is_some_and(|&&t| t < *i) {
                        taken.next();
                    }
                    taken.peek() != Some(&i)
                });
                structures.push(s);
            }
            Err(e) => {
                failures += 1;
                diag.failure = Some(e.to_string());
            }
        }
        diagnostics.push(diag);
        if failures >= 2 {
            return Ok(sort_and_finish(structures, remaining, diagnostics, Termination::RecoveryFailed));
        }
    }
    unreachable!()
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    points: &[DataPoint],
    originals: &[CarrierBundle],
    remaining: &[usize],
    model: &dyn ProblemModel,
    config: &EstimatorConfig,
    scale_cfg: &ScaleConfig,
    iteration: usize,
    n_eps: usize,
    diag: &mut IterationDiagnostics,
) -> Result<StructureEstimate> {
    let subset: Vec<DataPoint> = remaining.iter().map(|&i| points[i].clone()).collect();
    let transform = if config.normalize {
        NormalizationTransform::fit(&subset, model)?
    } else {
        NormalizationTransform::identity(model)
    };
    let bundles = if config.normalize {
        let normed: Vec<DataPoint> = subset.iter().map(|p| transform.apply(p)).collect();
        lift_all(model, &normed)?
    } else {
        remaining.iter().map(|&i| originals[i].clone()).collect()
    };

    let sampling = TrialSampling {
        trials: config.trials,
        seed: config.seed,
        iteration: iteration as u64,
        validity: &config.validity,
        max_draws: config.max_draws_per_trial,
    };
    let winner = best_trial(model, &bundles, n_eps, &sampling)
        .ok_or_else(|| Error::StructureNotFound("every scale trial was degenerate".into()))?;
    diag.scale_trial = Some(winner.trial);
    diag.clamped = winner.clamped;

    let scale = estimate_scale(&winner, n_eps, scale_cfg);
    diag.sigma_hat_normalized = Some(scale.sigma_hat);
    diag.region = scale.region;
    diag.weak = scale.weak;
    diag.collected = scale.collected.len();
    diag.stops = scale.expansions.iter().map(|e| e.stop).collect();

    let recovery_cfg = RecoveryConfig {
        trials: config.recovery_trial_count(),
        seed: config.seed,
        iteration: iteration as u64,
        validity: &config.validity,
        max_draws: config.max_draws_per_trial,
    };
    let recovery = recover_structure(model, &bundles, scale.sigma_hat, &scale.collected, &recovery_cfg)?;
    diag.recovery_trial = Some(recovery.trial);
    diag.mode_density = Some(recovery.mode.density);
    if recovery.inliers.len() <= model.elemental_size() {
        return Err(Error::StructureNotFound(format!(
            "{} inliers do not exceed an elemental subset",
            recovery.inliers.len()
        )));
    }

    let local: Vec<&CarrierBundle> = recovery.inliers.iter().map(|&i| &bundles[i]).collect();
    let fit = tls_refit(model, &local, &recovery.hypothesis);
    let (hypothesis, sigma_hat) = denormalize(model, &fit.hypothesis, scale.sigma_hat, &transform);

    let mut inliers: Vec<usize> = recovery.inliers.iter().map(|&i| remaining[i]).collect();
    inliers.sort_unstable();
    let refs: Vec<&CarrierBundle> = inliers.iter().map(|&i| &originals[i]).collect();
    let sigma_tls = tls_scale(&refs, &hypothesis, config.tls_scale);
    let (s, exact_fit) = strength(inliers.len(), sigma_tls);

    Ok(StructureEstimate {
        inliers,
        theta: hypothesis.theta,
        alpha: hypothesis.alpha,
        sigma_tls,
        strength: s,
        sigma_hat,
        iteration,
        exact_fit,
        weak: scale.weak,
    })
}
