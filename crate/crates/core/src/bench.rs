//! Matching estimates to ground truth and repeated seeded benchmark runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pipeline::{run, EstimationResult, EstimatorConfig};
use crate::synth::{generate, SceneSpec};

/// Outcome for one true structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub truth: usize,
    pub truth_size: usize,
    /// Position in the sorted structure list of the plurality match.
    pub estimate: Option<usize>,
    /// Points of the truth inside the matched estimate.
    pub shared: usize,
    pub precision: f64,
    pub recall: f64,
    pub correct: bool,
}

/// Fraction required of both precision and recall.
pub const MATCH_FRACTION: f64 = 0.5;

fn truth_count(labels: &[i64]) -> usize {
    labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0)
}

/// Matches true structures greedily in label order (strongest first) to the
/// unclaimed estimate holding the plurality of their points, ties to the
/// stronger estimate. A verdict is correct when at least half of the estimate
/// comes from the truth and it covers at least half of the truth.
pub fn match_structures(estimates: &[Vec<usize>], labels: &[i64]) -> Vec<Verdict> {
    let k = truth_count(labels);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        if l >= 0 {
            sizes[l as usize] += 1;
        }
    }
    let mut shared = vec![vec![0usize; estimates.len()]; k];
    for (e, members) in estimates.iter().enumerate() {
        for &i in members {
            if let Some(&l) = labels.get(i) {
                if l >= 0 {
                    shared[l as usize][e] += 1;
                }
            }
        }
    }
    let mut claimed = vec![false; estimates.len()];
    (0..k)
        .map(|t| {
            let best = (0..estimates.len())
                .filter(|&e| shared[t][e] > 0 && !claimed[e])
                .fold(None, |acc: Option<usize>, e| match acc {
                    Some(b) if shared[t][b] >= shared[t][e] => Some(b),
                    _ => Some(e),
                });
            match best {
                Some(e) => {
                    claimed[e] = true;
                    let s = shared[t][e];
                    let precision = s as f64 / estimates[e].len() as f64;
                    let recall = s as f64 / sizes[t] as f64;
                    Verdict {
                        truth: t,
                        truth_size: sizes[t],
                        estimate: Some(e),
                        shared: s,
                        precision,
                        recall,
                        correct: precision >= MATCH_FRACTION && recall >= MATCH_FRACTION,
                    }
                }
                None => Verdict {
                    truth: t,
                    truth_size: sizes[t],
                    estimate: None,
                    shared: 0,
                    precision: 0.0,
                    recall: 0.0,
                    correct: false,
                },
            }
        })
        .collect()
}

/// [`match_structures`] over an estimation result.
pub fn match_result(result: &EstimationResult, labels: &[i64]) -> Vec<Verdict> {
    let sets: Vec<Vec<usize>> = result.structures.iter().map(|s| s.inliers.clone()).collect();
    match_structures(&sets, labels)
}

/// Smallest strength among correctly matched estimates over the largest
/// strength among all other estimates.
pub fn strength_separation(result: &EstimationResult, verdicts: &[Verdict]) -> Option<f64> {
    let inlier: Vec<usize> = verdicts
        .iter()
        .filter(|v| v.correct)
        .filter_map(|v| v.estimate)
        .collect();
    if inlier.is_empty() {
        return None;
    }
    let s = |e: usize| result.structures[e].strength;
    let weakest = inlier.iter().map(|&e| s(e)).fold(f64::INFINITY, f64::min);
    let rest = (0..result.structures.len())
        .filter(|e| !inlier.contains(e))
        .map(s)
        .fold(0.0, f64::max);
    Some(if rest > 0.0 { weakest / rest } else { f64::INFINITY })
}

/// Matched estimate of a truth reported by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedStructure {
    pub verdict: Verdict,
    pub scale: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub n_in: Option<usize>,
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub run: usize,
    pub seed: u64,
    pub runtime_s: f64,
    pub structures: usize,
    pub matched: Vec<MatchedStructure>,
    pub separation: Option<f64>,
    pub error: Option<String>,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

/// Per-truth aggregate; moments are over correct runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSummary {
    pub truth: usize,
    pub detections: usize,
    pub runs: usize,
    pub scale: Option<Moments>,
    pub sigma_hat: Option<Moments>,
    pub n_in: Option<Moments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub runs: Vec<BenchRun>,
    pub summary: Vec<StructureSummary>,
    pub runtime: Option<Moments>,
}

fn matched(result: &EstimationResult, verdicts: Vec<Verdict>) -> Vec<MatchedStructure> {
    verdicts
        .into_iter()
        .map(|v| {
            let s = v.estimate.map(|e| &result.structures[e]);
            MatchedStructure {
                scale: s.map(|s| s.sigma_tls),
                sigma_hat: s.map(|s| s.sigma_hat),
                n_in: s.map(|s| s.n_in()),
                strength: s.map(|s| s.strength),
                verdict: v,
            }
        })
        .collect()
}

/// One seeded run: scene and estimator both use `seed`.
pub fn bench_run(spec: &SceneSpec, config: &EstimatorConfig, run_index: usize, seed: u64) -> Result<(BenchRun, EstimationResult)> {
    let scene = generate(spec, seed)?;
    let cfg = EstimatorConfig { seed, ..config.clone() };
    let start = Instant::now();
    let result = run(&scene.points, spec.model.model(), &cfg)?;
    let runtime_s = start.elapsed().as_secs_f64();
    let verdicts = match_result(&result, &scene.labels);
    let separation = strength_separation(&result, &verdicts);
    Ok((
        BenchRun {
            run: run_index,
            seed,
            runtime_s,
            structures: result.structures.len(),
            matched: matched(&result, verdicts),
            separation,
            error: None,
        },
        result,
    ))
}

/// `runs` runs with seeds `base_seed + run`; failed runs are recorded.
pub fn bench(spec: &SceneSpec, config: &EstimatorConfig, runs: usize, base_seed: u64) -> BenchReport {
    let records: Vec<BenchRun> = (0..runs)
        .map(|r| {
            let seed = base_seed.wrapping_add(r as u64);
            match bench_run(spec, config, r, seed) {
                Ok((record, _)) => record,
                Err(e) => BenchRun {
                    run: r,
                    seed,
                    runtime_s: 0.0,
                    structures: 0,
                    matched: Vec::new(),
                    separation: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    summarize(spec.structures.len(), records)
}

pub fn summarize(truths: usize, runs: Vec<BenchRun>) -> BenchReport {
    let summary = (0..truths)
        .map(|t| {
            let correct: Vec<&MatchedStructure> = runs
                .iter()
                .filter_map(|r| r.matched.get(t))
                .filter(|m| m.verdict.correct)
                .collect();
            let collect = |f: &dyn Fn(&MatchedStructure) -> Option<f64>| -> Vec<f64> {
                correct.iter().filter_map(|m| f(m)).collect()
            };
            StructureSummary {
                truth: t,
                detections: correct.len(),
                runs: runs.len(),
                scale: Moments::of(&collect(&|m| m.scale)),
                sigma_hat: Moments::of(&collect(&|m| m.sigma_hat)),
                n_in: Moments::of(&collect(&|m| m.n_in.map(|v| v as f64))),
            }
        })
        .collect();
    let times: Vec<f64> = runs.iter().filter(|r| r.error.is_none()).map(|r| r.runtime_s).collect();
    BenchReport {
        runtime: Moments::of(&times),
        runs,
        summary,
    }
}

impl BenchReport {
    /// Mean/(std) layout: a row of means with the standard deviations below.
    pub fn paper_table(&self) -> String {
        let fmt = |m: Option<Moments>| -> (String, String) {
            match m {
                Some(m) => (format!("{:.2}", m.mean), format!("({:.2})", m.std)),
                None => ("-".into(), "".into()),
            }
        };
        let mut out = String::new();
        let head: Vec<String> = self.summary.iter().map(|s| format!("{:>10}", s.truth + 1)).collect();
        out.push_str(&format!("{:<12}{}\n", "structure", head.join("")));
        let det: Vec<String> = self
            .summary
            .iter()
            .map(|s| format!("{:>10}", format!("{}/{}", s.detections, s.runs)))
            .collect();
        out.push_str(&format!("{:<12}{}\n", "correct", det.join("")));
        for (name, pick) in [
            ("scale", (|s: &StructureSummary| s.scale) as fn(&StructureSummary) -> Option<Moments>),
            ("inliers", |s: &StructureSummary| s.n_in),
        ] {
            let (means, stds): (Vec<String>, Vec<String>) = self
                .summary
                .iter()
                .map(|s| {
                    let (a, b) = fmt(pick(s));
                    (format!("{a:>10}"), format!("{b:>10}"))
                })
                .unzip();
            out.push_str(&format!("{:<12}{}\n", name, means.join("")));
            out.push_str(&format!("{:<12}{}\n", "", stds.join("")));
        }
        if let Some(t) = self.runtime {
            out.push_str(&format!("runtime     {:.3} s ({:.3})\n", t.mean, t.std));
        }
        out
    }

    /// One CSV row per run with per-truth columns.
    pub fn write_runs_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let truths = self.summary.len();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "run".to_string(),
            "seed".into(),
            "runtime_s".into(),
            "structures".into(),
            "separation".into(),
            "error".into(),
        ];
        for t in 1..=truths {
            for f in ["correct", "precision", "recall", "scale", "sigma_hat", "n_in", "strength"] {
                header.push(format!("{f}_{t}"));
            }
        }
        out.write_record(&header)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
        for r in &self.runs {
            let mut row = vec![
                r.run.to_string(),
                r.seed.to_string(),
                format!("{}", r.runtime_s),
                r.structures.to_string(),
                opt(r.separation),
                r.error.clone().unwrap_or_default(),
            ];
            for t in 0..truths {
                match r.matched.get(t) {
                    Some(m) => {
                        row.push(m.verdict.correct.to_string());
                        row.push(format!("{}", m.verdict.precision));
                        row.push(format!("{}", m.verdict.recall));
                        row.push(opt(m.scale));
                        row.push(opt(m.sigma_hat));
                        row.push(m.n_in.map_or(String::new(), |v| v.to_string()));
                        row.push(opt(m.strength));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 7)),
                }
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<i64> {
        // truth 0: 0..10, truth 1: 10..20, outliers 20..30
        (0..30).map(|i| if i < 10 { 0 } else if i < 20 { 1 } else { -1 }).collect()
    }

    #[test]
    fn perfect_segmentation() {
        let est = vec![(0..10).collect(), (10..20).collect(), (20..30).collect()];
        let v = match_structures(&est, &labels());
        assert!(v.iter().all(|v| v.correct && v.precision == 1.0 && v.recall == 1.0));
        assert_eq!(v[1].estimate, Some(1));
    }

    #[test]
    fn merged_estimate_is_correct_at_most_once() {
        let est = vec![(0..20).collect(), (20..30).collect()];
        let v = match_structures(&est, &labels());
        assert!(v.iter().filter(|v| v.correct).count() <= 1);
        let est = vec![(0..19).collect()];
        let v = match_structures(&est, &labels());
        assert_eq!(v.iter().filter(|v| v.correct).count(), 1);
    }

    #[test]
    fn contaminated_circle_is_incorrect() {
        // 84 true inliers of 200 inside a 261-point estimate
        let labels: Vec<i64> = (0..1700).map(|i| if i < 200 { 0 } else { -1 }).collect();
        let est: Vec<Vec<usize>> = vec![(0..84).chain(200..377).collect()];
        let v = match_structures(&est, &labels);
        assert_eq!(est[0].len(), 261);
        assert!((v[0].precision - 84.0 / 261.0).abs() < 1e-12);
        assert!(!v[0].correct);
    }

    #[test]
    fn relabeling_truths_permutes_verdicts() {
        let est = vec![(0..12).collect(), (12..20).collect(), (20..30).collect()];
        let a = match_structures(&est, &labels());
        let swapped: Vec<i64> = labels().iter().map(|&l| if l >= 0 { 1 - l } else { l }).collect();
        let b = match_structures(&est, &swapped);
        for t in 0..2 {
            assert_eq!(a[t].correct, b[1 - t].correct);
            assert_eq!(a[t].precision, b[1 - t].precision);
            assert_eq!(a[t].estimate, b[1 - t].estimate);
        }
    }

    #[test]
    fn moments() {
        let m = Moments::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert!(Moments::of(&[]).is_none());
    }
}
