//! Scale estimation for a single structure.
//!
//! `M` elemental subsets are scored by the sum of their `n_ε` smallest
//! worst-case Mahalanobis distances. The winning distance sequence is then cut
//! into equal-width segments for a growing sequence of widths; an expansion
//! criterion finds where the point density collapses for each width, and the
//! farthest boundary inside the region where expansion succeeds is the scale.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{solve_elemental_bundles, CarrierBundle, Hypothesis, ProblemModel, ValidityConfig};
use crate::rng::{trial_rng, Stage};

/// Floor applied to `θᵀCθ` before dividing.
pub const DENOMINATOR_FLOOR: f64 = 1e-15;

/// Worst-case distance of one point, with the carrier that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDistance {
    pub distance: f64,
    pub carrier: usize,
    /// Some carrier variance hit [`DENOMINATOR_FLOOR`].
    pub clamped: bool,
}

/// Maximum over carriers of `|x^[c]ᵀθ − α| / √(θᵀC^[c]θ)`.
pub fn mahalanobis_detail(bundle: &CarrierBundle, h: &Hypothesis) -> PointDistance {
    let mut best = PointDistance {
        distance: -1.0,
        carrier: 0,
        clamped: false,
    };
    let mut clamped = false;
    for c in 0..bundle.len() {
        let residual = (bundle.projection(c, &h.theta) - h.alpha).abs();
        let mut var = bundle.projection_variance(c, &h.theta);
        if var <= DENOMINATOR_FLOOR {
            var = DENOMINATOR_FLOOR;
            clamped = true;
        }
        let d = residual / var.sqrt();
        if d > best.distance {
            best.distance = d;
            best.carrier = c;
        }
    }
    best.clamped = clamped;
    best
}

pub fn mahalanobis(bundle: &CarrierBundle, h: &Hypothesis) -> f64 {
    mahalanobis_detail(bundle, h).distance
}

/// `n_ε = max(round(ε·n/100), 5·m_e)`.
pub fn initial_set_size(n: usize, epsilon: f64, elemental: usize) -> Result<usize> {
    let floor = 5 * elemental;
    if n < floor {
        return Err(Error::TooFewPoints {
            available: n,
            required: floor,
        });
    }
    let by_ratio = (epsilon * n as f64 / 100.0).round() as usize;
    Ok(by_ratio.max(floor))
}

/// Distances of every point to the hypothesis of one trial.
#[derive(Debug, Clone)]
pub struct TrialDistances {
    pub trial: usize,
    pub hypothesis: Hypothesis,
    pub distances: Vec<f64>,
    /// Indices sorting `distances` ascending (ties by index).
    pub order: Vec<usize>,
    pub clamped: bool,
}

impl TrialDistances {
    pub fn new(trial: usize, hypothesis: Hypothesis, bundles: &[CarrierBundle]) -> Self {
        let mut clamped = false;
        let distances: Vec<f64> = bundles
            .iter()
            .map(|b| {
                let d = mahalanobis_detail(b, &hypothesis);
                clamped |= d.clamped;
                d.distance
            })
            .collect();
        let mut order: Vec<usize> = (0..distances.len()).collect();
        order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
        Self {
            trial,
            hypothesis,
            distances,
            order,
            clamped,
        }
    }

    pub fn sorted(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.distances[i]).collect()
    }

    /// `Σ_{i ≤ n_ε} d̃_[i]`
    pub fn prefix_sum(&self, n_eps: usize) -> f64 {
        self.order[..n_eps.min(self.order.len())]
            .iter()
            .map(|&i| self.distances[i])
            .sum()
    }
}

/// Sum of the `k` smallest values, order-independent.
fn smallest_sum(values: &mut [f64], k: usize) -> f64 {
    let k = k.min(values.len());
    if k == 0 {
        return 0.0;
    }
    if k < values.len() {
        values.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    }
    let mut head = values[..k].to_vec();
    head.sort_by(|a, b| a.total_cmp(b));
    head.iter().sum()
}

/// Index (into `trials`) of the minimum-sum trial; ties go to the lower index.
pub fn select_best_trial(trials: &[TrialDistances], n_eps: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, t) in trials.iter().enumerate() {
        let s = t.prefix_sum(n_eps);
        match best {
            Some((_, b)) if s >= b => {}
            _ => best = Some((j, s)),
        }
    }
    best.map(|(j, _)| j)
}

/// Which segments enter the running average of the expansion criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionAverage {
    /// `r_k = n_k / mean(n₀ … n_{k−1})`
    #[default]
    IncludeInitial,
    /// `r_1 = n_1 / n_0`, then `r_k = n_k / mean(n₁ … n_{k−1})`
    ExcludeInitial,
}

/// Incremental evaluation of the expansion criterion. Returns `k_t`.
pub fn expansion_stop(counts: &[usize], threshold: f64, average: ExpansionAverage) -> usize {
    if counts.len() < 2 {
        return 1;
    }
    let mut sum = counts[0] as f64;
    let mut terms = 1.0;
    for k in 1..counts.len() {
        let nk = counts[k] as f64;
        if nk * terms <= threshold * sum {
            return k;
        }
        if average == ExpansionAverage::ExcludeInitial && k == 1 {
            sum = 0.0;
            terms = 0.0;
        }
        sum += nk;
        terms += 1.0;
    }
    counts.len() - 1
}

/// Walks the sorted sequence in segments of `width`, stopping as soon as the
/// criterion fires. Returns `(k_t, counts)` where `counts` holds the segments
/// examined, up to the one containing the largest distance.
pub fn expand_sorted(
    sorted: &[f64],
    width: f64,
    threshold: f64,
    average: ExpansionAverage,
) -> (usize, Vec<usize>) {
    if !(width > 0.0) || sorted.is_empty() {
        return (1, Vec::new());
    }
    let last_segment = (sorted[sorted.len() - 1] / width).floor() as usize;
    let mut counts = Vec::new();
    let mut pos = 0;
    let mut sum = 0.0;
    let mut terms = 0.0;
    for k in 0..=last_segment {
        let upper = (k + 1) as f64 * width;
        let start = pos;
        while pos < sorted.len() && sorted[pos] < upper {
            pos += 1;
        }
        let nk = (pos - start) as f64;
        counts.push(pos - start);
        if k >= 1 && nk * terms <= threshold * sum {
            return (k, counts);
        }
        if average == ExpansionAverage::ExcludeInitial && k == 1 {
            sum = 0.0;
            terms = 0.0;
        }
        sum += nk;
        terms += 1.0;
    }
    ((counts.len() - 1).max(1), counts)
}

/// Segment counts of a half-open partition `[kΔd, (k+1)Δd)` up to the largest value.
pub fn segment_counts(sorted: &[f64], width: f64) -> Vec<usize> {
    if !(width > 0.0) || sorted.is_empty() {
        return Vec::new();
    }
    let last = (sorted[sorted.len() - 1] / width).floor() as usize;
    let mut counts = vec![0; last + 1];
    for &d in sorted {
        counts[((d / width).floor() as usize).min(last)] += 1;
    }
    counts
}

/// One expansion run over the winning sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    /// Rank of the segment width, percent of `n`.
    pub percent: f64,
    /// `Δd`, in Mahalanobis units.
    pub width: f64,
    pub counts: Vec<usize>,
    /// `k_t`
    pub stop: usize,
}

impl ExpansionRecord {
    pub fn estimate(&self) -> f64 {
        self.stop as f64 * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    /// `ε`, percent.
    pub epsilon: f64,
    /// Density ratio at which expansion stops.
    pub threshold: f64,
    /// Largest segment-width rank, percent.
    pub rank_cap: f64,
    pub average: ExpansionAverage,
    /// Lower bound on `σ̂` (normalized Mahalanobis units).
    pub min_scale: f64,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            epsilon: 5.0,
            threshold: 0.5,
            rank_cap: 50.0,
            average: ExpansionAverage::IncludeInitial,
            min_scale: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub sigma_hat: f64,
    /// Inclusive percent range `[ε + start, ε + end]` of the region of interest.
    pub region: Option<(f64, f64)>,
    /// Point indices with `d̃ ≤ σ̂`, ascending by distance.
    pub collected: Vec<usize>,
    /// No expansion succeeded below the rank cap.
    pub weak: bool,
    pub expansions: Vec<ExpansionRecord>,
}

/// `d̃` at rank `round(p·n/100)`, clamped to `[min_rank, n]`.
///
/// Passing `min_rank = n_ε` keeps the first segment at least as large as the
/// initial set, so the elemental subset's own zero distances never set a width.
pub fn distance_at_percent(sorted: &[f64], percent: f64, min_rank: usize) -> f64 {
    let n = sorted.len();
    let rank = ((percent * n as f64 / 100.0).round() as usize).clamp(min_rank.clamp(1, n), n);
    sorted[rank - 1]
}

/// Stalled widths (`k_t = 1`) a region of interest may bridge.
pub const REGION_GAP: usize = 2;

/// Runs of expanding widths (`k_t ≥ 2`) as inclusive index pairs, where up
/// to [`REGION_GAP`] stalled widths inside a run do not end it.
fn expanding_runs(expansions: &[ExpansionRecord]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (j, e) in expansions.iter().enumerate() {
        if e.stop < 2 {
            continue;
        }
        match runs.last_mut() {
            Some(last) if j - last.1 - 1 <= REGION_GAP => last.1 = j,
            _ => runs.push((j, j)),
        }
    }
    runs
}

/// First run holding at least two expanding widths; an isolated success only
/// counts when no other run exists.
fn region_of_interest(expansions: &[ExpansionRecord]) -> Option<(usize, usize)> {
    let runs = expanding_runs(expansions);
    runs.iter().copied().find(|(s, e)| e > s).or_else(|| runs.first().copied())
}

/// Scale estimate from the winning trial's distance sequence. Segment widths
/// never use a rank below `min_rank`.
pub fn estimate_scale(winning: &TrialDistances, min_rank: usize, cfg: &ScaleConfig) -> ScaleEstimate {
    let sorted = winning.sorted();
    let mut expansions = Vec::new();
    let mut j = 0;
    loop {
        let percent = cfg.epsilon + j as f64;
        if percent > cfg.rank_cap {
            break;
        }
        let width = distance_at_percent(&sorted, percent, min_rank);
        let (stop, counts) = expand_sorted(&sorted, width, cfg.threshold, cfg.average);
        expansions.push(ExpansionRecord {
            percent,
            width,
            counts,
            stop,
        });
        j += 1;
    }

    let (sigma, region, weak) = match region_of_interest(&expansions) {
        Some((s, end)) => {
            let sigma = expansions[s..=end]
                .iter()
                .filter(|e| e.stop >= 2)
                .map(ExpansionRecord::estimate)
                .fold(0.0, f64::max);
            (
                sigma,
                Some((expansions[s].percent, expansions[end].percent)),
                false,
            )
        }
        None => (
            expansions.last().map_or(0.0, |e| e.width),
            None,
            true,
        ),
    };
    let sigma_hat = sigma.max(cfg.min_scale);
    let collected = winning
        .order
        .iter()
        .copied()
        .take_while(|&i| winning.distances[i] <= sigma_hat)
        .collect();
    ScaleEstimate {
        sigma_hat,
        region,
        collected,
        weak,
        expansions,
    }
}

/// Draws one non-degenerate elemental hypothesis from `pool`, resampling
/// degenerate subsets up to `max_draws` times.
pub(crate) fn draw_hypothesis<R: rand::Rng>(
    rng: &mut R,
    model: &dyn ProblemModel,
    bundles: &[CarrierBundle],
    pool: &[usize],
    validity: &ValidityConfig,
    max_draws: usize,
) -> Option<Hypothesis> {
    let m_e = model.elemental_size();
    if pool.len() < m_e {
        return None;
    }
    let mut subset: Vec<&CarrierBundle> = Vec::with_capacity(m_e);
    for _ in 0..max_draws {
        subset.clear();
        for k in index::sample(rng, pool.len(), m_e) {
            subset.push(&bundles[pool[k]]);
        }
        if let Some(h) = solve_elemental_bundles(model, &subset, validity) {
            return Some(h);
        }
    }
    None
}

/// Sampling parameters for the `M` scale trials.
#[derive(Debug, Clone, Copy)]
pub struct TrialSampling<'a> {
    pub trials: usize,
    pub seed: u64,
    pub iteration: u64,
    pub validity: &'a ValidityConfig,
    pub max_draws: usize,
}

/// Runs the `M` trials in parallel and returns the minimum-sum one.
pub fn best_trial(
    model: &dyn ProblemModel,
    bundles: &[CarrierBundle],
    n_eps: usize,
    sampling: &TrialSampling<'_>,
) -> Option<TrialDistances> {
    let pool: Vec<usize> = (0..bundles.len()).collect();
    let scored: Vec<(usize, f64, Hypothesis)> = (0..sampling.trials)
        .into_par_iter()
        .filter_map(|j| {
            let mut rng = trial_rng(sampling.seed, sampling.iteration, Stage::Scale, j as u64);
            let h = draw_hypothesis(
                &mut rng,
                model,
                bundles,
                &pool,
                sampling.validity,
                sampling.max_draws,
            )?;
            let mut d: Vec<f64> = bundles.iter().map(|b| mahalanobis(b, &h)).collect();
            let s = smallest_sum(&mut d, n_eps);
            s.is_finite().then_some((j, s, h))
        })
        .collect();
    let (j, _, h) = scored
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
    Some(TrialDistances::new(j, h, bundles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lift, DataPoint, Homography, Line2D};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn line_h(t: [f64; 2], alpha: f64) -> Hypothesis {
        Hypothesis::new(DVector::from_vec(t.to_vec()), alpha).unwrap()
    }

    #[test]
    fn line_distance_is_perpendicular_offset() {
        let b = lift(&Line2D, &DataPoint::new(vec![5.0, 7.0])).unwrap();
        assert_eq!(mahalanobis(&b, &line_h([1.0, 0.0], 0.0)), 5.0);
        let on = lift(&Line2D, &DataPoint::new(vec![0.0, 7.0])).unwrap();
        assert_eq!(mahalanobis(&on, &line_h([1.0, 0.0], 0.0)), 0.0);
    }

    #[test]
    fn worst_case_over_two_carriers() {
        // residuals 0.3 and 0.8 with variances 1 and 4
        let theta = DVector::from_element(9, 1.0 / 3.0);
        let mut x1 = DVector::zeros(9);
        x1[0] = 0.3 * 3.0;
        let mut x2 = DVector::zeros(9);
        x2[0] = 0.8 * 3.0;
        let c1 = DMatrix::from_diagonal_element(9, 9, 1.0);
        let c2 = DMatrix::from_diagonal_element(9, 9, 4.0);
        let bundle = CarrierBundle {
            carriers: vec![x1, x2],
            jacobians: vec![DMatrix::zeros(9, 4), DMatrix::zeros(9, 4)],
            covariances: vec![c1, c2],
        };
        let h = Hypothesis { theta, alpha: 0.0 };
        let d = mahalanobis_detail(&bundle, &h);
        assert!((d.distance - 0.4).abs() < 1e-12);
        assert_eq!(d.carrier, 1);
    }

    #[test]
    fn initial_set_sizes() {
        assert_eq!(initial_set_size(600, 5.0, 2).unwrap(), 30);
        assert_eq!(initial_set_size(100, 5.0, 8).unwrap(), 40);
        assert!(matches!(
            initial_set_size(15, 5.0, 8),
            Err(Error::TooFewPoints { available: 15, required: 40 })
        ));
    }

    fn fake_trial(trial: usize, distances: Vec<f64>) -> TrialDistances {
        let mut order: Vec<usize> = (0..distances.len()).collect();
        order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        TrialDistances {
            trial,
            hypothesis: line_h([1.0, 0.0], 0.0),
            distances,
            order,
            clamped: false,
        }
    }

    #[test]
    fn best_trial_selection() {
        let a = fake_trial(0, vec![0.4; 40]); // first-30 sum 12.0
        let b = fake_trial(1, vec![9.5 / 30.0; 40]);
        assert_eq!(select_best_trial(&[a.clone(), b.clone()], 30), Some(1));
        let exact = fake_trial(2, vec![0.0; 40]);
        assert_eq!(select_best_trial(&[a.clone(), b, exact], 30), Some(2));
        assert_eq!(select_best_trial(&[a.clone(), a], 30), Some(0));
    }

    #[test]
    fn expansion_examples() {
        let inc = ExpansionAverage::IncludeInitial;
        assert_eq!(expansion_stop(&[30, 28, 25, 5], 0.5, inc), 3);
        assert_eq!(expansion_stop(&[30, 10], 0.5, inc), 1);
        assert_eq!(expansion_stop(&[30, 30, 30, 30, 30], 0.5, inc), 4);
    }

    #[test]
    fn expand_sorted_matches_partition_counts() {
        let sorted: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).powf(1.3)).collect();
        for width in [0.5, 2.0, 7.0] {
            let (k, counts) = expand_sorted(&sorted, width, 0.5, ExpansionAverage::IncludeInitial);
            let full = segment_counts(&sorted, width);
            assert_eq!(&full[..counts.len()], &counts[..]);
            assert_eq!(k, expansion_stop(&full, 0.5, ExpansionAverage::IncludeInitial));
        }
    }

    /// Brute force: recompute every ratio from scratch in integer arithmetic.
    fn brute_force_stop(counts: &[usize], exclude_initial: bool) -> usize {
        for k in 1..counts.len() {
            let window: &[usize] = if exclude_initial && k >= 2 {
                &counts[1..k]
            } else {
                &counts[..k]
            };
            let sum: usize = window.iter().sum();
            // n_k / (sum / len) <= 1/2  <=>  2 n_k len <= sum
            if 2 * counts[k] * window.len() <= sum {
                return k;
            }
        }
        counts.len().saturating_sub(1).max(1)
    }

    proptest! {
        #[test]
        fn expansion_matches_brute_force(
            head in 1usize..60,
            tail in proptest::collection::vec(0usize..60, 0..20),
        ) {
            let mut counts = vec![head];
            counts.extend(tail);
            prop_assert_eq!(
                expansion_stop(&counts, 0.5, ExpansionAverage::IncludeInitial),
                brute_force_stop(&counts, false)
            );
            prop_assert_eq!(
                expansion_stop(&counts, 0.5, ExpansionAverage::ExcludeInitial),
                brute_force_stop(&counts, true)
            );
        }

        #[test]
        fn sign_flip_preserves_distance(
            x in -100.0f64..100.0, y in -100.0f64..100.0,
            a in -1.0f64..1.0, b in -1.0f64..1.0, alpha in -50.0f64..50.0,
        ) {
            prop_assume!(a.abs() + b.abs() > 1e-3);
            let bundle = lift(&Line2D, &DataPoint::new(vec![x, y])).unwrap();
            let h = line_h([a, b], alpha);
            prop_assert_eq!(mahalanobis(&bundle, &h), mahalanobis(&bundle, &h.negated()));
        }

        #[test]
        fn homography_distance_is_one_of_the_carriers(
            y in proptest::collection::vec(-3.0f64..3.0, 4),
            t in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let bundle = lift(&Homography, &DataPoint::new(y)).unwrap();
            let h = match Hypothesis::new(DVector::from_vec(t), 0.0) { Some(h) => h, None => return Ok(()) };
            let d = mahalanobis(&bundle, &h);
            let per: Vec<f64> = (0..2)
                .map(|c| bundle.projection(c, &h.theta).abs()
                    / bundle.projection_variance(c, &h.theta).max(DENOMINATOR_FLOOR).sqrt())
                .collect();
            prop_assert!(per.iter().all(|&p| d >= p));
            prop_assert!(per.iter().any(|&p| p == d));
        }

        #[test]
        fn selection_ignores_point_order(
            seqs in proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, 40), 2..6),
            seed in any::<u64>(),
        ) {
            let trials: Vec<TrialDistances> =
                seqs.iter().cloned().enumerate().map(|(j, d)| fake_trial(j, d)).collect();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let perm = index::sample(&mut rng, 40, 40).into_vec();
            let shuffled: Vec<TrialDistances> = seqs
                .iter()
                .enumerate()
                .map(|(j, d)| fake_trial(j, perm.iter().map(|&p| d[p]).collect()))
                .collect();
            prop_assert_eq!(select_best_trial(&trials, 10), select_best_trial(&shuffled, 10));
        }
    }

    #[test]
    fn scale_from_synthetic_sequence() {
        // 60 tightly packed distances followed by a sparse tail
        let mut d: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        d.extend((0..140).map(|i| 10.0 + i as f64 * 2.0));
        let trial = fake_trial(0, d);
        let est = estimate_scale(&trial, 1, &ScaleConfig::default());
        assert!(!est.weak);
        let (lo, _hi) = est.region.unwrap();
        assert!(lo >= 5.0);
        // boundary of the dense block
        assert!(est.sigma_hat >= 5.9 && est.sigma_hat < 10.0, "{}", est.sigma_hat);
        assert_eq!(est.collected.len(), 60);
        let sorted = trial.sorted();
        for (rank, &i) in est.collected.iter().enumerate() {
            assert_eq!(trial.distances[i], sorted[rank]);
            assert!(trial.distances[i] <= est.sigma_hat);
        }
    }

    #[test]
    fn sigma_is_max_over_region() {
        let mut d: Vec<f64> = (0..300).map(|i| i as f64 * 0.01).collect();
        d.extend((0..300).map(|i| 5.0 + i as f64 * 0.9));
        let trial = fake_trial(0, d);
        let est = estimate_scale(&trial, 1, &ScaleConfig::default());
        let (lo, hi) = est.region.unwrap();
        let expected = est
            .expansions
            .iter()
            .filter(|e| e.percent >= lo && e.percent <= hi && e.stop >= 2)
            .map(ExpansionRecord::estimate)
            .fold(0.0, f64::max);
        assert_eq!(est.sigma_hat, expected);
        let ends = |p: f64| est.expansions.iter().find(|e| e.percent == p).unwrap().stop;
        assert!(ends(lo) >= 2 && ends(hi) >= 2);
    }

    fn record(stop: usize) -> ExpansionRecord {
        ExpansionRecord { percent: 0.0, width: 1.0, counts: vec![], stop }
    }

    #[test]
    fn region_bridges_short_stalls() {
        let region = |stops: &[usize]| {
            let recs: Vec<_> = stops.iter().map(|&k| record(k)).collect();
            region_of_interest(&recs)
        };
        assert_eq!(region(&[2, 1, 1, 3, 4, 2, 1, 2, 2, 2, 2, 2, 1]), Some((0, 11)));
        assert_eq!(region(&[4, 3, 2, 1, 1, 1, 2, 2, 2]), Some((0, 2)));
        assert_eq!(region(&[3, 1, 1, 1, 2, 2, 1]), Some((4, 5)));
        assert_eq!(region(&[1, 2, 1, 1, 3, 1]), Some((1, 4)));
        assert_eq!(region(&[2, 1, 1, 1, 1]), Some((0, 0)));
        assert_eq!(region(&[1, 1, 1]), None);
    }

    #[test]
    fn width_rank_floor() {
        let d = [0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(distance_at_percent(&d, 5.0, 1), 0.0);
        assert_eq!(distance_at_percent(&d, 5.0, 4), 2.0);
        assert_eq!(distance_at_percent(&d, 50.0, 4), 3.0);
        assert_eq!(distance_at_percent(&d, 5.0, 99), 8.0);
    }

    #[test]
    fn exact_structure_collects_everything() {
        let trial = fake_trial(0, vec![0.0; 100]);
        let est = estimate_scale(&trial, 1, &ScaleConfig::default());
        assert!(est.weak);
        assert_eq!(est.sigma_hat, ScaleConfig::default().min_scale);
        assert_eq!(est.collected.len(), 100);
    }
}
