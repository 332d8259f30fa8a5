use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mulinl::bench::{bench_run, summarize, BenchReport, BenchRun};
use mulinl::io::{
    dataset_csv, labels_csv, plot_rows, read_dataset, to_fixed_json, write_atomic, ConfigEcho, ResultDocument,
};
use mulinl::synth::{generate, preset, SceneSpec};
use mulinl::{run, Error, EstimatorConfig, ModelKind, Result};

const THREADS_VAR: &str = "MULINL_THREADS";

#[derive(Parser)]
#[command(name = "mulinl", version, about = "Threshold-free estimation of multiple inlier structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate every structure in a point file.
    Estimate(EstimateArgs),
    /// Generate a synthetic scene and its ground-truth labels.
    Synth(SynthArgs),
    /// Repeat seeded synthesis and estimation and tabulate the outcome.
    Bench(BenchArgs),
}

#[derive(Args)]
struct EstimatorArgs {
    /// Elemental subsets per scale-estimation round.
    #[arg(long)]
    trials: Option<usize>,
    /// Initial set size, percent of the remaining points.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON estimator settings; explicit flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

impl EstimatorArgs {
    fn resolve(&self) -> Result<EstimatorConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => EstimatorConfig::default(),
        };
        if let Some(m) = self.trials {
            cfg.trials = m;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    /// CSV or JSON point file.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Result document; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Record wall-clock seconds in the result.
    #[arg(long)]
    timing: bool,
    /// Export fundamental matrices projected to rank 2.
    #[arg(long)]
    rank2: bool,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Preset name or path to a JSON scene spec.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset file, CSV unless the extension is `.json`.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Label file; defaults to `<output stem>.labels.csv`.
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Preset name or path to a JSON scene spec.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// JSON report.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// One CSV row per run.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// CSV of classified point coordinates for every run.
    #[arg(long, value_name = "PATH")]
    plot_dump: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_scenario(name: &str) -> Result<SceneSpec> {
    let path = Path::new(name);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    } else {
        preset(name)
    }
}

fn column_names(model: ModelKind) -> Vec<String> {
    let names: &[&str] = match model {
        ModelKind::Line2D | ModelKind::Ellipse2D => &["x", "y"],
        ModelKind::Cylinder3D => &["x", "y", "z"],
        ModelKind::FundamentalMatrix | ModelKind::Homography => &["x1", "y1", "x2", "y2"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let config = args.estimator.resolve()?;
    let model = args.model.model();
    let points = read_dataset(&args.input, model.input_dim())?;
    let start = Instant::now();
    let result = run(&points, model, &config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let echo = ConfigEcho {
        model: args.model,
        input: Some(args.input.display().to_string()),
        points: points.len(),
        estimator: config,
    };
    let mut doc = ResultDocument::new(echo, &result, args.timing.then_some(elapsed));
    if args.rank2 {
        doc.project_rank2();
    }
    let bytes = doc.to_json()?;
    match &args.output {
        Some(path) => write_atomic(path, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let scene = generate(&spec, args.seed)?;
    let data = if args.output.extension().is_some_and(|e| e == "json") {
        let rows: Vec<&[f64]> = scene.points.iter().map(|p| p.y.as_slice()).collect();
        to_fixed_json(&rows)?
    } else {
        dataset_csv(&scene.points, Some(&column_names(spec.model)))?
    };
    let labels = args
        .labels
        .clone()
        .unwrap_or_else(|| args.output.with_extension("labels.csv"));
    write_atomic(&args.output, &data)?;
    write_atomic(&labels, &labels_csv(&scene.labels))?;
    eprintln!(
        "{} points ({:?} inliers, {} outliers) -> {}, labels -> {}",
        scene.points.len(),
        scene.counts(),
        spec.outliers,
        args.output.display(),
        labels.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchDocument<'a> {
    scenario: &'a str,
    estimator: &'a EstimatorConfig,
    #[serde(flatten)]
    report: &'a BenchReport,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let spec = load_scenario(&args.scenario)?;
    let config = args.estimator.resolve()?;
    if args.runs == 0 {
        return Err(Error::InvalidInput("runs must be at least 1".into()));
    }
    let mut runs = Vec::with_capacity(args.runs);
    let mut plot = Vec::new();
    for r in 0..args.runs {
        let seed = config.seed.wrapping_add(r as u64);
        let record = match bench_run(&spec, &config, r, seed) {
            Ok((record, result)) => {
                if args.plot_dump.is_some() {
                    let scene = generate(&spec, seed)?;
                    plot.extend(plot_rows(r, &scene.points, &scene.labels, &result));
                }
                record
            }
            Err(e) => BenchRun {
                run: r,
                seed,
                runtime_s: 0.0,
                structures: 0,
                matched: Vec::new(),
                separation: None,
                error: Some(e.to_string()),
            },
        };
        if let Some(e) = &record.error {
            eprintln!("run {r} (seed {seed}) failed: {e}");
        }
        runs.push(record);
    }
    let report = summarize(spec.structures.len(), runs);
    print!("{}", report.paper_table());
    if let Some(path) = &args.output {
        let doc = BenchDocument {
            scenario: &args.scenario,
            estimator: &config,
            report: &report,
        };
        write_atomic(path, &to_fixed_json(&doc)?)?;
    }
    if let Some(path) = &args.csv {
        let mut buf = Vec::new();
        report.write_runs_csv(&mut buf)?;
        write_atomic(path, &buf)?;
    }
    if let Some(path) = &args.plot_dump {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["run", "rank", "index", "label"].iter().map(|s| s.to_string()).collect();
        header.extend(column_names(spec.model));
        w.write_record(&header)?;
        for row in &plot {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    let outcome = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Synth(a) => synth(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
