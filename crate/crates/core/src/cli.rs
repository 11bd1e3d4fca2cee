//! Command-line front end. Every command works against a workspace directory:
//!
//! ```text
//! workspace/
//!   manifest.json        config digest and the full run configuration
//!   dataset.json         ingested raw series
//!   normalization.json   per-series affine parameters and normalized training values
//!   partition.json       cluster assignment and centroids
//!   models/cluster-R.json
//!   logs/cluster-R.csv   per-iteration fit trace
//!   forecasts.json       general-model forecasts (no refinement)
//!   report.json          final report
//!   plots/ID.csv         epoch,fact,forecast
//! ```
//!
//! Exit codes: 0 success, 1 data or domain error, 2 usage or parse error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::clustering::{sweep_clusters, ClusterModelSet, PartitionDoc};
use crate::error::{Error, Result};
use crate::genome::Antibody;
use crate::mcsa::write_fit_log;
use crate::pipeline::{
    cluster_stage, count_model_fits, fit_cluster_models, normalize_training, plot_rows, prepare,
    refine, write_plot_csv, ClusterModelDoc, ForecastReport, GeneralStage, ModelSource,
    PipelineConfig,
};
use crate::series::{
    ingest_csv, Dataset, DatasetDoc, IngestOptions, MissingPolicy, NormalizationParams, Orientation,
};

pub const THREADS_ENV: &str = "IMMUNOCAST_THREADS";

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    pub missing: MissingPolicy,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "immunocast",
    version,
    about = "Grouped time-series forecasting with clonal-selection symbolic models"
)]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for clustering and model search
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Workspace directory (default: ./workspace)
    #[arg(long, global = true)]
    pub workspace: Option<PathBuf>,
    /// Repeat for more detail
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a CSV of series into the workspace
    Ingest(InputArgs),
    /// Compute normalization parameters on the training range
    Normalize(PipelineArgs),
    /// Partition the normalized series
    Cluster(PipelineArgs),
    /// Print `c,objective,assignment_digest` for a range of cluster counts
    Sweep(SweepArgs),
    /// Fit one model per cluster centroid
    Fit(PipelineArgs),
    /// Forecast every series with its cluster's model
    Forecast(PipelineArgs),
    /// Refit series whose general-model AFER exceeds the threshold
    Refine(PipelineArgs),
    /// Write plot data and print a per-series summary
    Report(PipelineArgs),
    /// Every stage from ingest to report
    Run(RunArgs),
    /// Print the analytic form of an antibody string and optionally evaluate it
    EvalExpr(EvalArgs),
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// CSV with header `id[,unit],EPOCH,...`
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Interpolate interior missing cells instead of rejecting them
    #[arg(long)]
    pub interpolate: bool,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Last training epoch
    #[arg(long)]
    pub train_cutoff: Option<i64>,
    /// Refinement threshold, AFER percent
    #[arg(long)]
    pub threshold: Option<f64>,
    /// `corrected` (trend preserving) or `paper` (mirrored about each mean)
    #[arg(long)]
    pub orientation: Option<Orientation>,
    /// MCSA population size
    #[arg(long)]
    pub population: Option<usize>,
    /// MCSA iterations
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Spine blocks in the antibody template
    #[arg(long)]
    pub spines: Option<usize>,
    /// Discard artifacts written under a different configuration
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Inclusive range `LO..HI` (or a single count)
    #[arg(long, default_value = "1..5")]
    pub range: String,
    /// Sweep this CSV directly instead of the workspace dataset
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Antibody string, e.g. `L*S/SeSdC-S+EaCbEa`
    pub antibody: String,
    /// Comma-separated constants for `?` leaves, in order
    #[arg(long, allow_hyphen_values = true)]
    pub constants: Option<String>,
    /// Comma-separated lag window `d[j-1],d[j-2],...`
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

/// Parses arguments, runs the command, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Sizes the global rayon pool from `IMMUNOCAST_THREADS` (0 or unset = automatic).
pub fn init_threads() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::Config(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        })?,
        Err(_) => 0,
    };
    // A pool may already exist when called twice in one process; that is fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = |args: &PipelineArgs| Context::new(cli, &file, args);
    match &cli.command {
        Command::Ingest(args) => {
            let ws = ctx(&PipelineArgs::default())?;
            ws.claim()?;
            cmd_ingest(&ws, args)
        }
        Command::Normalize(args) => cmd_normalize(&ctx(args)?),
        Command::Cluster(args) => cmd_cluster(&ctx(args)?),
        Command::Sweep(args) => cmd_sweep(&ctx(&args.pipeline)?, args, out),
        Command::Fit(args) => cmd_fit(&ctx(args)?),
        Command::Forecast(args) => cmd_forecast(&ctx(args)?),
        Command::Refine(args) => cmd_refine(&ctx(args)?),
        Command::Report(args) => cmd_report(&ctx(args)?, out),
        Command::Run(args) => cmd_run(&ctx(&args.pipeline)?, &args.input, out),
        Command::EvalExpr(args) => cmd_eval_expr(args, out),
    }
}

/// Resolved configuration plus the workspace it operates on.
struct Context {
    run: RunConfig,
    digest: String,
    root: PathBuf,
    force: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_digest: String,
    config: RunConfig,
}

/// A JSON artifact body stamped with the digest of the configuration that produced it.
#[derive(Debug, Serialize, Deserialize)]
struct Stamped<T> {
    config_digest: String,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormalizationDoc {
    train_range: (i64, i64),
    params: NormalizationParams,
    normalized: DatasetDoc,
}

impl PipelineArgs {
    fn overrides_nothing(&self) -> bool {
        let PipelineArgs {
            clusters,
            horizon,
            train_cutoff,
            threshold,
            orientation,
            population,
            iterations,
            spines,
            force: _,
        } = self;
        clusters.is_none()
            && horizon.is_none()
            && train_cutoff.is_none()
            && threshold.is_none()
            && orientation.is_none()
            && population.is_none()
            && iterations.is_none()
            && spines.is_none()
    }
}

impl Context {
    /// Resolves the configuration. With no `--config`, `--seed` or pipeline
    /// flags, an existing workspace keeps the configuration it was built with.
    fn new(cli: &Cli, file: &RunConfig, args: &PipelineArgs) -> Result<Self> {
        let root = cli
            .workspace
            .clone()
            .or_else(|| file.workspace.clone())
            .unwrap_or_else(|| PathBuf::from("workspace"));
        let manifest = root.join("manifest.json");
        let mut run = if cli.config.is_none()
            && cli.seed.is_none()
            && args.overrides_nothing()
            && manifest.exists()
        {
            read_json::<Manifest>(&manifest)?.config
        } else {
            file.clone()
        };
        let p = &mut run.pipeline;
        if let Some(seed) = cli.seed {
            p.kmeans.seed = seed;
            p.mcsa.seed = seed;
        }
        if let Some(c) = args.clusters {
            p.kmeans.c = c;
        }
        if let Some(h) = args.horizon {
            p.horizon = h;
        }
        if let Some(t) = args.train_cutoff {
            p.train_cutoff = Some(t);
        }
        if let Some(t) = args.threshold {
            p.refine_threshold = t;
        }
        if let Some(o) = args.orientation {
            p.orientation = o;
        }
        if let Some(n) = args.population {
            p.mcsa.population_size = n;
        }
        if let Some(g) = args.iterations {
            p.mcsa.iterations = g;
        }
        if let Some(s) = args.spines {
            p.mcsa.template = crate::genome::SbtTemplate::new(s)?;
        }
        p.mcsa.validate()?;
        Ok(Context {
            digest: run.pipeline.digest(),
            run,
            root,
            force: args.force,
        })
    }

    fn cfg(&self) -> &PipelineConfig {
        &self.run.pipeline
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Binds the workspace to this configuration. A workspace written under a
    /// different digest is refused unless `force`, which clears it.
    fn claim(&self) -> Result<()> {
        let manifest = self.path("manifest.json");
        if manifest.exists() {
            let existing: Manifest = read_json(&manifest)?;
            if existing.config_digest != self.digest {
                if !self.force {
                    return Err(Error::Workspace(format!(
                        "{} holds artifacts from configuration {}, current is {}; pass --force to replace them",
                        self.root.display(),
                        short(&existing.config_digest),
                        short(&self.digest)
                    )));
                }
                self.clear()?;
            }
        }
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_json(
            &manifest,
            &Manifest {
                config_digest: self.digest.clone(),
                config: self.run.clone(),
            },
        )
    }

    /// Like `claim`, for stages that need an ingested workspace.
    fn attach(&self) -> Result<()> {
        if !self.path("manifest.json").exists() {
            return Err(Error::Workspace(format!(
                "{} is not a workspace; run `ingest` or `run` first",
                self.root.display()
            )));
        }
        self.claim()
    }

    /// Removes derived artifacts. The dataset does not depend on the
    /// configuration, so it is kept and restamped.
    fn clear(&self) -> Result<()> {
        let dataset = self.path("dataset.json");
        if dataset.exists() {
            let doc: Stamped<DatasetDoc> = read_json(&dataset)?;
            self.save("dataset.json", doc.body)?;
        }
        for name in [
            "normalization.json",
            "partition.json",
            "forecasts.json",
            "report.json",
        ] {
            let p = self.path(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        for dir in ["models", "logs", "plots"] {
            let p = self.path(dir);
            if p.exists() {
                fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
        Ok(())
    }

    /// Reads a stamped artifact, refusing one produced under another digest.
    fn load<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(Error::Workspace(format!(
                "{} not found; run the earlier stages first",
                path.display()
            )));
        }
        let stamped: Stamped<T> = read_json(&path)?;
        self.check_digest(&path, &stamped.config_digest)?;
        Ok(stamped.body)
    }

    fn check_digest(&self, path: &Path, digest: &str) -> Result<()> {
        if digest != self.digest && !self.force {
            return Err(Error::Workspace(format!(
                "{} was produced by configuration {}, current is {}; rerun that stage or pass --force",
                path.display(),
                short(digest),
                short(&self.digest)
            )));
        }
        Ok(())
    }

    fn save<T: Serialize>(&self, rel: &str, body: T) -> Result<()> {
        write_json(
            &self.path(rel),
            &Stamped {
                config_digest: self.digest.clone(),
                body,
            },
        )
    }

    fn dataset(&self) -> Result<Dataset> {
        let doc: DatasetDoc = self.load("dataset.json")?;
        doc.try_into()
    }

    fn general_stage(&self, ds: &Dataset) -> Result<GeneralStage> {
        let prepared = prepare(ds, self.cfg())?;
        let doc: PartitionDoc = self.load("partition.json")?;
        let partition = doc.partition(&prepared.train)?;
        let mut models = Vec::with_capacity(doc.c);
        for r in 0..doc.c {
            let path = self.path(&format!("models/cluster-{r}.json"));
            if !path.exists() {
                return Err(Error::Workspace(format!(
                    "{} not found; run `fit` first",
                    path.display()
                )));
            }
            let m: ClusterModelDoc = read_json(&path)?;
            self.check_digest(&path, &m.model.config_digest)?;
            models.push(m.cluster_model()?);
        }
        Ok(GeneralStage {
            prepared,
            partition,
            clusters: ClusterModelSet {
                centroids: doc.centroids,
                objective: doc.objective,
                iterations_used: 0,
            },
            models,
        })
    }
}

fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_ingest(ws: &Context, args: &InputArgs) -> Result<()> {
    let input = args
        .input
        .clone()
        .or_else(|| ws.run.input.clone())
        .ok_or_else(|| {
            Error::Config("no input CSV: pass --input or set `input` in the config".into())
        })?;
    let missing = if args.interpolate {
        MissingPolicy::Linear
    } else {
        ws.run.missing
    };
    let ds = ingest_csv(&input, IngestOptions { missing })
        .map_err(|e| e.in_stage("ingest", input.display().to_string()))?;
    info!(
        "ingested {} series x {} epochs from {}",
        ds.len(),
        ds.n(),
        input.display()
    );
    ws.save("dataset.json", DatasetDoc::from(&ds))
}

fn cmd_normalize(ws: &Context) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    let prepared = prepare(&ds, ws.cfg())?;
    let e = prepared.train.epochs();
    ws.save(
        "normalization.json",
        NormalizationDoc {
            train_range: (e[0], e[e.len() - 1]),
            params: prepared.params.clone(),
            normalized: DatasetDoc::from(&prepared.normalized),
        },
    )
}

fn cmd_cluster(ws: &Context) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    ws.load::<NormalizationDoc>("normalization.json")?;
    let prepared = prepare(&ds, ws.cfg())?;
    let (partition, model) = cluster_stage(&prepared, ws.cfg())?;
    info!("c = {}, J = {}", partition.c(), model.objective);
    ws.save(
        "partition.json",
        PartitionDoc::new(&prepared.train, &partition, &model),
    )
}

fn parse_range(text: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::Config(format!("invalid range `{text}`, expected LO..HI"));
    let (lo, hi) = match text.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => (text, text),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo < 1 || lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn cmd_sweep<W: Write>(ws: &Context, args: &SweepArgs, out: &mut W) -> Result<()> {
    let range = parse_range(&args.range)?;
    let ds = match &args.input {
        Some(path) => ingest_csv(
            path,
            IngestOptions {
                missing: ws.run.missing,
            },
        )?,
        None => ws.dataset()?,
    };
    if *range.end() > ds.len() {
        return Err(Error::Config(format!(
            "range ends at {} but the dataset has {} series",
            range.end(),
            ds.len()
        )));
    }
    let mut cfg = ws.cfg().clone();
    cfg.kmeans.c = *range.start();
    let prepared = normalize_training(&ds, &cfg)?;
    let rows = sweep_clusters(&prepared.normalized, range, &cfg.kmeans)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["c", "objective", "assignment_digest"])?;
    for row in rows {
        w.write_record([
            row.c.to_string(),
            row.objective.to_string(),
            row.assignment_digest,
        ])?;
    }
    w.flush().map_err(|e| Error::io("stdout", e))?;
    Ok(())
}

fn cmd_fit(ws: &Context) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    let prepared = prepare(&ds, ws.cfg())?;
    let doc: PartitionDoc = ws.load("partition.json")?;
    let models = fit_cluster_models(&doc.centroids, ws.cfg())?;
    let e = prepared.train.epochs();
    let range = (e[0], e[e.len() - 1]);
    for m in &models {
        info!(
            "cluster {}: AFER {:.4}% {}",
            m.cluster, m.model.train_afer, m.model.analytic
        );
        write_json(
            &ws.path(&format!("models/cluster-{}.json", m.cluster)),
            &m.to_doc(&ws.digest, range),
        )?;
        let log_path = ws.path(&format!("logs/cluster-{}.csv", m.cluster));
        fs::create_dir_all(ws.path("logs")).map_err(|e| Error::io(ws.path("logs"), e))?;
        let file = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        write_fit_log(&m.model.trace, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn cmd_forecast(ws: &Context) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    let general = ws.general_stage(&ds)?;
    let cfg = PipelineConfig {
        refine_threshold: f64::INFINITY,
        ..ws.cfg().clone()
    };
    let mut report = refine(&ds, &general, &cfg)?;
    restamp(&mut report, &ws.digest);
    write_json(&ws.path("forecasts.json"), &report)
}

/// `refine` stamps the digest of the configuration it was given; the
/// general-only forecast pass swaps the threshold, so put the run's digest back.
fn restamp(report: &mut ForecastReport, digest: &str) {
    report.config_digest = digest.to_string();
    for m in &mut report.models {
        m.model.config_digest = digest.to_string();
    }
}

fn cmd_refine(ws: &Context) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    let general = ws.general_stage(&ds)?;
    let report = refine(&ds, &general, ws.cfg())?;
    info!(
        "{} general + {} refined = {} model fits for {} series",
        report.models.len(),
        report.refined_count(),
        count_model_fits(&report),
        report.series.len()
    );
    write_json(&ws.path("report.json"), &report)
}

fn cmd_report<W: Write>(ws: &Context, out: &mut W) -> Result<()> {
    ws.attach()?;
    let ds = ws.dataset()?;
    let path = ws.path("report.json");
    if !path.exists() {
        return Err(Error::Workspace(format!(
            "{} not found; run `refine` first",
            path.display()
        )));
    }
    let report: ForecastReport = read_json(&path)?;
    ws.check_digest(&path, &report.config_digest)?;
    write_plots(ws, &ds, &report)?;
    print_summary(&report, out)
}

fn write_plots(ws: &Context, ds: &Dataset, report: &ForecastReport) -> Result<()> {
    let dir = ws.path("plots");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for entry in &report.series {
        let path = dir.join(format!("{}.csv", entry.id));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_plot_csv(&plot_rows(ds, entry)?, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `id,cluster,source,train_afer,horizon_error,f1..fh` as CSV.
fn print_summary<W: Write>(report: &ForecastReport, out: &mut W) -> Result<()> {
    let h = report.series.first().map_or(0, |s| s.forecasts.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "id".to_string(),
        "cluster".into(),
        "source".into(),
        "train_afer".into(),
        "horizon_error".into(),
    ];
    header.extend((1..=h).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for s in &report.series {
        let source = match s.model_source {
            ModelSource::General { .. } => "general",
            ModelSource::Refined => "refined",
        };
        let mut row = vec![
            s.id.clone(),
            s.cluster.to_string(),
            source.into(),
            cell(s.train_afer),
            cell(s.horizon_error),
        ];
        row.extend(
            s.forecasts
                .iter()
                .map(|&f| f.map_or_else(|| "invalid".to_string(), |x| x.to_string())),
        );
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("stdout", e))?;
    Ok(())
}

fn cmd_run<W: Write>(ws: &Context, input: &InputArgs, out: &mut W) -> Result<()> {
    ws.claim()?;
    cmd_ingest(ws, input)?;
    cmd_normalize(ws)?;
    cmd_cluster(ws)?;
    cmd_fit(ws)?;
    cmd_forecast(ws)?;
    cmd_refine(ws)?;
    cmd_report(ws, out)
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{what}: `{}` is not a number", s.trim())))
        })
        .collect()
}

fn cmd_eval_expr<W: Write>(args: &EvalArgs, out: &mut W) -> Result<()> {
    let constants = match &args.constants {
        Some(c) => parse_list(c, "constants")?,
        None => Vec::new(),
    };
    let ab = Antibody::parse(&args.antibody, &constants)?;
    let tree = ab.to_tree();
    let io = |e| Error::io("stdout", e);
    writeln!(out, "{}", tree.to_analytic_string()).map_err(io)?;
    if let Some(w) = &args.window {
        let window = parse_list(w, "window")?;
        match tree.evaluate(&window)? {
            Some(v) => writeln!(out, "{v}").map_err(io)?,
            None => writeln!(out, "invalid").map_err(io)?,
        }
    }
    Ok(())
}
