//! Command-line front end.
//!
//! Every output starts with metadata (tool version, subcommand and the full
//! parsed configuration, output paths excluded): `#` lines for CSV, a `metadata` object for JSON.
//! Nothing time-dependent is recorded, so reruns are byte-identical.
//!
//! Exit codes: 0 success, 2 input error, 3 empty or degenerate data,
//! 4 configuration error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{
    self, BridgeConfig, GofMethod, InferenceConfig, DEFAULT_BOOTSTRAP_REPS, DEFAULT_GRID_SUBINTERVALS,
    DEFAULT_REPS, DEFAULT_TOL,
};
use crate::classify::{self, Classifier, CvScheme, EvalMode, FeatureMatrix, QdaModel, SourceClass};
use crate::distributions::{DistKind, RefDistribution};
use crate::error::{Error, Result};
use crate::ingest::{self, DEFAULT_ENERGY_HI, DEFAULT_ENERGY_LO, DEFAULT_MIN_PIT};
use crate::metrics::{self, Metric, DEFAULT_GRID_POINTS};
use crate::sample::PitSample;
use crate::simstudy::{self, StudyConfig, DEFAULT_REPLICATES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(name = "pitdist", version, about = "Distances of interarrival times to the exponential class")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Kolmogorov, Wasserstein and Zolotarev distances of one source.
    Dist(DistArgs),
    /// Goodness-of-fit test for exponentiality.
    Gof(GofArgs),
    /// Monte Carlo draws from a limit law.
    Limit(LimitArgs),
    /// Finite-sample versus limit-law study.
    Simstudy(SimstudyArgs),
    /// Event lists to a features table.
    Ingest(IngestArgs),
    /// QDA and k-NN classification of a features table.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Event CSV (`time_s,energy_kev`) or, with --pit, one PIT value per line.
    pub input: PathBuf,
    /// Treat the input as raw interarrival times.
    #[arg(long)]
    pub pit: bool,
    /// Gaps CSV (`gap_start_s,gap_end_s`).
    #[arg(long)]
    pub gaps: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ENERGY_LO)]
    pub energy_lo: f64,
    #[arg(long, default_value_t = DEFAULT_ENERGY_HI)]
    pub energy_hi: f64,
    /// Minimum number of PIT for event input.
    #[arg(long, default_value_t = DEFAULT_MIN_PIT)]
    pub min_pit: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct DistArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GofMethodArg {
    Asymptotic,
    Bootstrap,
}

#[derive(Debug, Args, Serialize)]
pub struct BridgeArgs {
    /// Monte Carlo draws of the limit law.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_SUBINTERVALS)]
    pub grid_subintervals: usize,
    /// Tail mass beyond the simulation horizon.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Explicit horizon, overriding the tail rule.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: u64,
}

impl BridgeArgs {
    fn config(&self) -> BridgeConfig {
        BridgeConfig {
            horizon: self.horizon,
            grid_subintervals: self.grid_subintervals,
            tol: self.tol,
            reps: self.reps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GofArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Normalized metric: nw or nz2.
    #[arg(long, default_value = "nz2")]
    pub metric: String,
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = GofMethodArg::Asymptotic)]
    pub method: GofMethodArg,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_REPS)]
    pub bootstrap_reps: usize,
    #[command(flatten)]
    pub bridge: BridgeArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct LimitArgs {
    #[arg(long, default_value = "nz2")]
    pub metric: String,
    /// Reference law: exp, weibull or gamma.
    #[arg(long, default_value = "exp")]
    pub dist: String,
    #[arg(long, default_value_t = 1.0)]
    pub shape: f64,
    /// Mean of the reference law.
    #[arg(long, default_value_t = 1.0)]
    pub mean: f64,
    #[command(flatten)]
    pub bridge: BridgeArgs,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimstudyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = simstudy::DEFAULT_SIZES.to_vec())]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec!["nw".to_string(), "nz2".to_string()])]
    pub metrics: Vec<String>,
    /// Distributions as kind:shape, e.g. weibull:0.9.
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = ["exp:1", "weibull:0.9", "weibull:1.1", "gamma:0.9", "gamma:1.1"].map(String::from).to_vec()
    )]
    pub distributions: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_SUBINTERVALS)]
    pub grid_subintervals: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub seed: u64,
    /// Long-format CSV of draws.
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// JSON boxplot summary.
    #[arg(long)]
    #[serde(skip)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Event CSV files; the file stem is the source id.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub gaps: Option<PathBuf>,
    /// CSV `source_id,label` with labels NM, HO or LO.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ENERGY_LO)]
    pub energy_lo: f64,
    #[arg(long, default_value_t = DEFAULT_ENERGY_HI)]
    pub energy_hi: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_PIT)]
    pub min_pit: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    pub grid_points: usize,
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitArg {
    Qda,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Resub,
    Cv,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Features CSV as written by `ingest`.
    #[arg(long)]
    pub features: PathBuf,
    /// Distance feature: kappa, nw or nz2.
    #[arg(long, default_value = "nz2")]
    pub metric: String,
    #[arg(long, value_enum, default_value_t = FitArg::Qda)]
    pub fit: FitArg,
    /// Ridge added to QDA covariances.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Neighbours for k-NN; chosen by cross-validation when absent.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    #[arg(long, default_value = "cv10")]
    pub scheme: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Resub)]
    pub mode: ModeArg,
    /// Required whenever folds are drawn.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use a stored QDA model instead of fitting.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub confusion_out: Option<PathBuf>,
    /// JSON evaluation report.
    #[arg(long, short)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// CSV of per-source predictions (and QDA posteriors in percent).
    #[arg(long)]
    #[serde(skip)]
    pub predictions_out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Json(_) => EXIT_INPUT,
        Error::EmptySample | Error::SingularCovariance { .. } | Error::QuadratureFailure { .. } => EXIT_EMPTY,
        Error::InvalidParameter(_)
        | Error::Dimension(_)
        | Error::UnsupportedMetric(_)
        | Error::Config(_) => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("pitdist: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Dist(a) => cmd_dist(cli, a),
        Command::Gof(a) => cmd_gof(cli, a),
        Command::Limit(a) => cmd_limit(cli, a),
        Command::Simstudy(a) => cmd_simstudy(cli, a),
        Command::Ingest(a) => cmd_ingest(cli, a),
        Command::Classify(a) => cmd_classify(cli, a),
    }
}

fn metadata(cli: &Cli) -> serde_json::Value {
    json!({
        "tool": "pitdist",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cli,
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

fn write_csv_header(out: &mut dyn Write, cli: &Cli) -> Result<()> {
    let meta = metadata(cli);
    writeln!(out, "# pitdist {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "# config: {}", meta["config"])?;
    Ok(())
}

fn write_json(path: Option<&Path>, cli: &Cli, result: serde_json::Value) -> Result<()> {
    let mut out = open_output(path)?;
    let doc = json!({ "metadata": metadata(cli), "result": result });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn parse_metric(s: &str) -> Result<Metric> {
    s.parse().map_err(|_| Error::Config(format!("unknown metric {s:?}")))
}

/// One PIT value per line; blank lines, `#` comments and a non-numeric first
/// line (header) are skipped.
pub fn read_pit_file(path: &Path) -> Result<PitSample> {
    let reader = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    let mut seen_data = false;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() || field.starts_with('#') {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => values.push(v),
            Ok(v) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("PIT value {v} is not positive"),
                })
            }
            Err(_) if !seen_data => {}
            Err(_) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("{field:?} is not a number"),
                })
            }
        }
        seen_data = true;
    }
    PitSample::new(values)
}

fn load_sample(a: &InputArgs) -> Result<PitSample> {
    if a.pit {
        return read_pit_file(&a.input);
    }
    let series = ingest::parse_events(&a.input, a.gaps.as_deref())?;
    let series = ingest::filter_energy(&series, a.energy_lo, a.energy_hi)?;
    let pits = ingest::pit_values(&series);
    if pits.len() < a.min_pit.max(1) {
        log::error!("{} has {} PIT, fewer than {}", a.input.display(), pits.len(), a.min_pit);
        return Err(Error::EmptySample);
    }
    PitSample::new(pits)
}

fn cmd_dist(cli: &Cli, a: &DistArgs) -> Result<()> {
    let sample = load_sample(&a.input)?;
    let d = metrics::all_distances(&sample, a.input.grid_points)?;
    match a.out.format {
        Format::Json => write_json(a.out.output.as_deref(), cli, serde_json::to_value(d)?),
        Format::Csv => {
            let mut out = open_output(a.out.output.as_deref())?;
            write_csv_header(&mut out, cli)?;
            writeln!(out, "quantity,value")?;
            writeln!(out, "n,{}", d.n)?;
            writeln!(out, "mean,{:?}", d.mean)?;
            for m in Metric::ALL {
                writeln!(out, "{},{:?}", m.short_name(), d.get(m))?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_gof(cli: &Cli, a: &GofArgs) -> Result<()> {
    let sample = load_sample(&a.input)?;
    let metric = parse_metric(&a.metric)?;
    let cfg = InferenceConfig {
        bridge: a.bridge.config(),
        bootstrap_reps: a.bootstrap_reps,
        grid_points: a.input.grid_points,
    };
    let method = match a.method {
        GofMethodArg::Asymptotic => GofMethod::Asymptotic,
        GofMethodArg::Bootstrap => GofMethod::ParametricBootstrap,
    };
    let r = asymptotics::gof_exponentiality(&sample, metric, a.level, method, &cfg)?;
    match a.out.format {
        Format::Json => write_json(a.out.output.as_deref(), cli, serde_json::to_value(r)?),
        Format::Csv => {
            let mut out = open_output(a.out.output.as_deref())?;
            write_csv_header(&mut out, cli)?;
            writeln!(out, "metric,n,statistic,p_value,reject,level,reps")?;
            writeln!(
                out,
                "{},{},{:?},{:?},{},{:?},{}",
                r.metric.short_name(),
                r.n,
                r.statistic,
                r.p_value,
                r.reject,
                r.level,
                r.reps
            )?;
            out.flush()?;
            Ok(())
        }
    }
}

fn cmd_limit(cli: &Cli, a: &LimitArgs) -> Result<()> {
    let metric = parse_metric(&a.metric)?;
    let kind: DistKind = a.dist.parse().map_err(|_| Error::Config(format!("unknown law {:?}", a.dist)))?;
    let base = RefDistribution::mean_one(kind, a.shape)?;
    let dist = RefDistribution::new(kind, base.shape(), base.scale() * a.mean)?;
    let draws = asymptotics::sample_delta_infinity(metric, &dist, &a.bridge.config())?;
    let mut out = open_output(a.output.as_deref())?;
    write_csv_header(&mut out, cli)?;
    draws.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn parse_dist_arg(s: &str) -> Result<(DistKind, f64)> {
    let (kind, shape) = s.split_once(':').unwrap_or((s, "1"));
    let kind: DistKind = kind.parse().map_err(|_| Error::Config(format!("unknown law {kind:?}")))?;
    let shape: f64 = shape
        .parse()
        .map_err(|_| Error::Config(format!("bad shape in {s:?}")))?;
    Ok((kind, shape))
}

fn cmd_simstudy(cli: &Cli, a: &SimstudyArgs) -> Result<()> {
    let cfg = StudyConfig {
        distributions: a.distributions.iter().map(|s| parse_dist_arg(s)).collect::<Result<_>>()?,
        sizes: a.sizes.clone(),
        replicates: a.replicates,
        metrics: a.metrics.iter().map(|s| parse_metric(s)).collect::<Result<_>>()?,
        seed: a.seed,
        grid_points: a.grid_points,
        bridge_grid_subintervals: a.grid_subintervals,
        bridge_tol: a.tol,
    };
    cfg.validate()?;
    let table = simstudy::run_study(&cfg)?;
    let mut out = open_output(a.output.as_deref())?;
    write_csv_header(&mut out, cli)?;
    for (dist, metric, d) in &table.true_distances {
        writeln!(out, "# true distance {dist} {}: {d:?}", metric.short_name())?;
    }
    table.write_csv(&mut out)?;
    out.flush()?;
    if let Some(path) = &a.summary {
        let summary = simstudy::summarize(&table)?;
        write_json(
            Some(path),
            cli,
            json!({ "true_distances": table.true_distances, "cells": summary }),
        )?;
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<(String, SourceClass)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(io::Error::other(e)))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let id = rec.get(0).unwrap_or("").to_string();
        let label = rec.get(1).unwrap_or("").parse().map_err(|e: Error| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push((id, label));
    }
    Ok(out)
}

fn cmd_ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    use rayon::prelude::*;
    let labels = a.labels.as_deref().map(read_labels).transpose()?.unwrap_or_default();
    let built: Vec<Option<ingest::SourceFeatures>> = a
        .inputs
        .par_iter()
        .map(|path| {
            let series = ingest::parse_events(path, a.gaps.as_deref())?;
            let series = ingest::filter_energy(&series, a.energy_lo, a.energy_hi)?;
            ingest::build_features(&series, a.min_pit, a.grid_points)
        })
        .collect::<Result<_>>()?;
    let mut features = Vec::new();
    for (path, f) in a.inputs.iter().zip(built) {
        match f {
            Some(mut f) => {
                f.class_label = labels.iter().find(|(id, _)| *id == f.source_id).map(|(_, c)| *c);
                features.push(f);
            }
            None => log::warn!("{}: fewer than {} PIT, dropped", path.display(), a.min_pit),
        }
    }
    if features.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut out = open_output(a.output.as_deref())?;
    write_csv_header(&mut out, cli)?;
    ingest::write_features_csv(&features, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_classify(cli: &Cli, a: &ClassifyArgs) -> Result<()> {
    let metric = parse_metric(&a.metric)?;
    let features = ingest::read_features_csv(File::open(&a.features)?)?;
    let matrix = FeatureMatrix::from_features(&features, metric)?;
    let (points, labels) = matrix.labeled();
    let scheme: CvScheme = a.scheme.parse().map_err(|_| Error::Config(format!("unknown scheme {:?}", a.scheme)))?;
    let need_seed = a.mode == ModeArg::Cv || (a.fit == FitArg::Knn && a.k.is_none());
    let seed = match (a.seed, need_seed) {
        (Some(s), _) => s,
        (None, true) => return Err(Error::Config("--seed is required for cross-validation".into())),
        (None, false) => 0,
    };

    let mut report = serde_json::Map::new();
    report.insert("metric".into(), json!(metric));
    report.insert("n_labeled".into(), json!(points.len()));
    let mut predictions: Vec<(String, SourceClass, Vec<(SourceClass, f64)>)> = Vec::new();

    let classifier = match a.fit {
        FitArg::Qda => {
            let model = match &a.model {
                Some(p) => QdaModel::from_json(&std::fs::read_to_string(p)?)?,
                None => {
                    if points.is_empty() {
                        return Err(Error::EmptySample);
                    }
                    classify::fit_qda(&points, &labels, a.ridge)?
                }
            };
            if let Some(p) = &a.model_out {
                std::fs::write(p, model.to_json()? + "\n")?;
            }
            for (id, p) in matrix.ids.iter().zip(&matrix.points) {
                let r = model.predict(p)?;
                predictions.push((id.clone(), r.class, r.percent()));
            }
            report.insert("model".into(), serde_json::to_value(&model)?);
            Classifier::Qda { ridge: a.ridge }
        }
        FitArg::Knn => {
            if points.is_empty() {
                return Err(Error::EmptySample);
            }
            let k = match a.k {
                Some(k) => k,
                None => {
                    let grid = a.k_grid.clone().unwrap_or_else(classify::default_k_grid);
                    let sel = classify::select_k(&points, &labels, &grid, scheme, seed)?;
                    report.insert("k_selection".into(), serde_json::to_value(&sel)?);
                    sel.k
                }
            };
            for (id, p) in matrix.ids.iter().zip(&matrix.points) {
                predictions.push((id.clone(), classify::knn_predict(&points, &labels, k, p)?, Vec::new()));
            }
            Classifier::Knn { k }
        }
    };
    report.insert("classifier".into(), serde_json::to_value(classifier)?);

    if !points.is_empty() && a.model.is_none() {
        let mode = match a.mode {
            ModeArg::Resub => EvalMode::Resubstitution,
            ModeArg::Cv => EvalMode::Cv { scheme, seed },
        };
        let cm = classify::evaluate(classifier, &points, &labels, mode)?;
        report.insert("mode".into(), serde_json::to_value(mode)?);
        report.insert("accuracy".into(), json!(cm.accuracy()));
        report.insert(
            "ppv".into(),
            json!(SourceClass::ALL
                .iter()
                .map(|&c| (c.code().to_string(), json!(cm.ppv(c))))
                .collect::<serde_json::Map<_, _>>()),
        );
        report.insert("confusion".into(), serde_json::to_value(cm)?);
        if let Some(p) = &a.confusion_out {
            let mut out = open_output(Some(p))?;
            write_csv_header(&mut out, cli)?;
            cm.write_csv(&mut out)?;
            out.flush()?;
        }
    }

    if let Some(p) = &a.predictions_out {
        let mut out = open_output(Some(p))?;
        write_csv_header(&mut out, cli)?;
        writeln!(out, "source_id,predicted,post_NM,post_HO,post_LO")?;
        for (id, class, post) in &predictions {
            let pct = |c: SourceClass| {
                post.iter()
                    .find(|(x, _)| *x == c)
                    .map(|(_, v)| format!("{v:?}"))
                    .unwrap_or_default()
            };
            writeln!(
                out,
                "{id},{class},{},{},{}",
                pct(SourceClass::Extragalactic),
                pct(SourceClass::HeavilyObscured),
                pct(SourceClass::LightlyObscured)
            )?;
        }
        out.flush()?;
    }
    write_json(a.output.as_deref(), cli, serde_json::Value::Object(report))
}
