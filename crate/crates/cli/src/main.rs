use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slomo_core::catalog::{self, Property, Scene, SequenceRecord};
use slomo_core::dtree::{self, CrossValidation, DataSet, FitParams};
use slomo_core::metrics::{self, Alignment, EvalConfig, Metric, RunResult, RunStatus};
use slomo_core::perfcluster::{self, Category, Clustering};
use slomo_core::playback::{
    self, ClockKind, DeliveryMode, EstimatorSpec, PlaybackConfig, RunLog, SyntheticEstimator,
};
use slomo_core::report::{self, Mode, ReportTable, RunRecord};
use slomo_core::traj_io::{self, Trajectory, TrajectoryFormat};

#[derive(Parser)]
#[command(name = "slomo", version, about = "Evaluate, characterize and profile visual odometry runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score an estimated trajectory against ground truth.
    Evaluate(EvaluateArgs),
    /// Train a decision tree on catalog properties.
    Characterize(CharacterizeArgs),
    /// Cluster run outcomes into performance categories.
    Cluster(ClusterArgs),
    /// Replay frames to the synthetic estimator.
    Play(PlayArgs),
    /// Aggregate per-component timings from playback logs.
    Profile(ProfileArgs),
    /// Render the accuracy summary table from run records.
    Report(ReportArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long, default_value = "tum")]
    est_format: TrajectoryFormat,
    /// Timestamp file for a KITTI estimate.
    #[arg(long)]
    est_times: Option<PathBuf>,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "tum")]
    gt_format: TrajectoryFormat,
    #[arg(long)]
    gt_times: Option<PathBuf>,
    #[arg(long, default_value = "se3")]
    align: Alignment,
    #[arg(long, default_value_t = metrics::DEFAULT_RPE_DELTA)]
    rpe_delta: f64,
    #[arg(long, default_value_t = traj_io::DEFAULT_MAX_DIFF)]
    max_diff: f64,
    #[arg(long, default_value_t = metrics::DEFAULT_MAX_GAP)]
    max_gap: f64,
    /// Frame rate assumed for KITTI files without timestamps.
    #[arg(long, default_value_t = traj_io::DEFAULT_KITTI_RATE_HZ)]
    kitti_rate: f64,
    /// Append run records (one per available metric) to this CSV.
    #[arg(long, requires_all = ["sequence", "algorithm"])]
    append_records: Option<PathBuf>,
    #[arg(long)]
    sequence: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long, default_value = "normal")]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    run_id: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SceneFilter {
    All,
    Indoor,
    Outdoor,
}

impl SceneFilter {
    fn name(self) -> &'static str {
        match self {
            SceneFilter::All => "all",
            SceneFilter::Indoor => "indoor",
            SceneFilter::Outdoor => "outdoor",
        }
    }

    fn keeps(self, scene: Scene) -> bool {
        match self {
            SceneFilter::All => true,
            SceneFilter::Indoor => scene == Scene::Indoor,
            SceneFilter::Outdoor => scene == Scene::Outdoor,
        }
    }
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Write the selected tree as Graphviz DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

impl TreeArgs {
    fn params(&self) -> FitParams {
        FitParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            rng_seed: self.seed,
        }
    }
}

#[derive(Args)]
struct CharacterizeArgs {
    /// Catalog CSV; the bundled 12-sequence table when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// `difficulty` or a property column to predict.
    #[arg(long, default_value = "difficulty")]
    label: String,
    /// Scene subsets to train on; repeat for several trees.
    #[arg(long, value_enum, default_values_t = [SceneFilter::All])]
    filter: Vec<SceneFilter>,
    /// Property columns to leave out of the predictors.
    #[arg(long)]
    exclude: Vec<Property>,
    #[command(flatten)]
    tree: TreeArgs,
}

#[derive(Args)]
struct ClusterArgs {
    /// Observation CSV; the bundled normal-speed runs when omitted.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Number of clusters (4 by default, 3 with --aggregate).
    #[arg(long)]
    k: Option<usize>,
    /// Error saturation cap in m or m/s.
    #[arg(long, default_value_t = perfcluster::DEFAULT_ERROR_CAP)]
    cap: f64,
    /// Three-category clustering for a tree pooled over all algorithms.
    #[arg(long)]
    aggregate: bool,
    /// Write clustered observations to this CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train a category tree on the clustered runs.
    #[arg(long)]
    characterize: bool,
    /// Catalog joined with run sequences for the tree.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Restrict the tree to one algorithm's runs.
    #[arg(long)]
    algorithm: Option<String>,
    /// Seeds both clustering and fold assignment.
    #[command(flatten)]
    tree: TreeArgs,
}

#[derive(Args)]
struct PlayArgs {
    /// Frame list CSV (`index,t_source`).
    #[arg(long, conflicts_with_all = ["count", "hz"])]
    frames: Option<PathBuf>,
    /// Number of uniformly spaced frames when no frame list is given.
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 20.0)]
    hz: f64,
    /// Estimator spec (TOML); a three-component default when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed in the estimator spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value = "realtime_drop")]
    mode: DeliveryMode,
    #[arg(long, default_value = "virtual")]
    clock: ClockKind,
    /// Write the full run log as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Run logs written by `play --log`.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run record CSV, or a directory of them; the bundled table when omitted.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Emit the table as JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(text: &str) -> Result<()> {
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string(value)? + "\n"))
}

fn load_trajectory(path: &Path, format: TrajectoryFormat, times: Option<&Path>, rate: f64) -> Result<Trajectory> {
    let text = read(path)?;
    let parsed = match format {
        TrajectoryFormat::Tum => traj_io::parse_tum(&text),
        TrajectoryFormat::EurocGt => traj_io::parse_euroc_gt(&text),
        TrajectoryFormat::Kitti => {
            let times = times.map(read).transpose()?;
            traj_io::parse_kitti(&text, times.as_deref(), rate)
        }
    };
    parsed.with_context(|| format!("{}", path.display()))
}

fn evaluate(args: &EvaluateArgs) -> Result<RunStatus> {
    let est = load_trajectory(&args.est, args.est_format, args.est_times.as_deref(), args.kitti_rate)?;
    let gt = load_trajectory(&args.gt, args.gt_format, args.gt_times.as_deref(), args.kitti_rate)?;
    let config = EvalConfig {
        max_diff: args.max_diff,
        align: args.align,
        rpe_delta: args.rpe_delta,
        max_gap: args.max_gap,
    };
    let result = metrics::run_result(Some(&est), &gt, &config);
    print_json(&result)?;
    if let Some(path) = &args.append_records {
        append_records(path, args, &result)?;
    }
    Ok(result.status)
}

fn append_records(path: &Path, args: &EvaluateArgs, result: &RunResult) -> Result<()> {
    let records: Vec<RunRecord> = [Metric::Rmse, Metric::Rpe]
        .into_iter()
        .filter(|&m| !result.is_success() || result.metric(m).is_some())
        .map(|metric| RunRecord {
            sequence: args.sequence.clone().unwrap_or_default(),
            algorithm: args.algorithm.clone().unwrap_or_default(),
            mode: args.mode,
            run_id: args.run_id,
            metric,
            value: result.metric(metric).filter(|_| result.is_success()),
            loss_rate: result.loss_rate,
            status: result.status,
        })
        .collect();
    let text = report::write_records(&records);
    let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
    let body = if fresh {
        text.as_str()
    } else {
        text.split_once('\n').map_or("", |(_, rest)| rest)
    };
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    file.write_all(body.as_bytes())?;
    Ok(())
}

fn load_catalog(path: Option<&Path>) -> Result<Vec<SequenceRecord>> {
    match path {
        None => Ok(catalog::bundled_catalog()),
        Some(p) => catalog::parse_catalog(&read(p)?).with_context(|| format!("{}", p.display())),
    }
}

#[derive(Serialize)]
struct TreeSummary<'a> {
    subset: &'a str,
    label: &'a str,
    rows: usize,
    predictors: Vec<&'a str>,
    folds: usize,
    seed: u64,
    accuracy: f64,
    best_fold: usize,
    fold_accuracies: &'a [f64],
    nodes: usize,
    depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dot: Option<String>,
}

/// Path for one of several trees: `tree.dot` becomes `tree-indoor.dot`.
fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{suffix}"),
    };
    path.with_file_name(name)
}

/// Trains, writes the DOT file when requested and prints the summary line.
/// Without a DOT path the DOT text is embedded in the summary.
fn train_and_report(data: &DataSet, subset: &str, label: &str, tree: &TreeArgs, dot: Option<&Path>) -> Result<()> {
    let cv: CrossValidation = dtree::cross_validate_fit(data, tree.folds, &tree.params())
        .with_context(|| format!("training on {subset} ({} rows)", data.len()))?;
    let dot_text = cv.tree.export_dot();
    if let Some(path) = dot {
        write(path, &dot_text)?;
    }
    let schema = data.schema();
    print_json(&TreeSummary {
        subset,
        label,
        rows: data.len(),
        predictors: schema.predictors.iter().map(|p| p.name.as_str()).collect(),
        folds: tree.folds,
        seed: tree.seed,
        accuracy: cv.accuracy,
        best_fold: cv.best_fold,
        fold_accuracies: &cv.fold_accuracies,
        nodes: cv.tree.root.node_count(),
        depth: cv.tree.root.depth(),
        dot: dot.is_none().then_some(dot_text),
    })
}

fn characterize(args: &CharacterizeArgs) -> Result<()> {
    let records = load_catalog(args.catalog.as_deref())?;
    let label = if args.label.eq_ignore_ascii_case("difficulty") {
        None
    } else {
        Some(args.label.parse::<Property>().map_err(anyhow::Error::msg)?)
    };
    let properties: Vec<Property> = Property::ALL
        .into_iter()
        .filter(|p| !args.exclude.contains(p))
        .collect();
    let mut filters = args.filter.clone();
    filters.dedup();
    for filter in &filters {
        let subset: Vec<SequenceRecord> = records.iter().filter(|r| filter.keeps(r.scene)).cloned().collect();
        let data = dtree::catalog_dataset_labelled(&subset, &properties, label);
        let dot = args.tree.dot.as_ref().map(|p| {
            if filters.len() > 1 {
                suffixed(p, filter.name())
            } else {
                p.clone()
            }
        });
        train_and_report(&data, filter.name(), &args.label, &args.tree, dot.as_deref())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CentroidSummary {
    cluster: usize,
    loss_rate: f64,
    err_norm: f64,
    category: Category,
    size: usize,
}

#[derive(Serialize)]
struct ClusterSummary {
    k: usize,
    seed: u64,
    observations: usize,
    sse: f64,
    iterations: usize,
    centroids: Vec<CentroidSummary>,
}

fn summarize_clusters(c: &Clustering, categories: &[Category], seed: u64) -> ClusterSummary {
    ClusterSummary {
        k: c.k,
        seed,
        observations: c.assignment.len(),
        sse: c.sse,
        iterations: c.iterations,
        centroids: c
            .centroids
            .iter()
            .enumerate()
            .map(|(i, p)| CentroidSummary {
                cluster: i,
                loss_rate: p[0],
                err_norm: p[1],
                category: categories[i],
                size: c.assignment.iter().filter(|&&a| a == i).count(),
            })
            .collect(),
    }
}

fn cluster(args: &ClusterArgs) -> Result<()> {
    let k = args.k.unwrap_or(if args.aggregate { 3 } else { 4 });
    if args.aggregate && k != 3 {
        bail!("--aggregate clusters into 3 categories, got --k {k}");
    }
    let rows = match &args.runs {
        None => report::bundled_observations(),
        Some(p) => perfcluster::parse_runs(&read(p)?).with_context(|| format!("{}", p.display()))?,
    };
    let (clustering, categories, clustered) = perfcluster::cluster_runs(&rows, k, args.tree.seed, args.cap)?;
    if let Some(path) = &args.out {
        write(path, &perfcluster::write_clustered(&clustered))?;
    }
    print_json(&summarize_clusters(&clustering, &categories, args.tree.seed))?;

    if args.characterize {
        let records = load_catalog(args.catalog.as_deref())?;
        let runs: Vec<_> = clustered
            .into_iter()
            .filter(|r| args.algorithm.as_ref().is_none_or(|a| &r.algorithm == a))
            .collect();
        if runs.is_empty() {
            bail!("no runs for algorithm {:?}", args.algorithm.as_deref().unwrap_or(""));
        }
        let properties: Vec<Property> = Property::ALL
            .into_iter()
            .filter(|&p| p != Property::RevisitFreq)
            .collect();
        let data = perfcluster::category_dataset(&records, &runs, &properties, k)?;
        let subset = args.algorithm.as_deref().unwrap_or("all");
        train_and_report(&data, subset, "category", &args.tree, args.tree.dot.as_deref())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PlaySummary {
    frames: usize,
    delivered: usize,
    dropped: usize,
    faults: usize,
    tracked: usize,
}

fn play(args: &PlayArgs) -> Result<()> {
    let frames = match &args.frames {
        Some(p) => playback::parse_frames(&read(p)?).with_context(|| format!("{}", p.display()))?,
        None => {
            if !(args.hz > 0.0) {
                bail!("--hz must be positive");
            }
            playback::uniform_frames(args.count, args.hz)
        }
    };
    let mut spec = match &args.spec {
        Some(p) => EstimatorSpec::from_toml(&read(p)?).with_context(|| format!("{}", p.display()))?,
        None => EstimatorSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let config = PlaybackConfig::new(args.rate, args.mode, args.clock)?;
    let mut estimator = SyntheticEstimator::new(spec)?.sleeping(args.clock == ClockKind::Wall);
    let log = playback::run(&frames, &mut estimator, &config)?;
    if let Some(path) = &args.log {
        write(path, &serde_json::to_string_pretty(&log)?)?;
    }
    print_json(&PlaySummary {
        frames: frames.len(),
        delivered: log.delivered.len(),
        dropped: log.dropped.len(),
        faults: log.faults.len(),
        tracked: log.delivered.iter().filter(|d| d.tracked).count(),
    })
}

fn profile(args: &ProfileArgs) -> Result<()> {
    let logs = args
        .logs
        .iter()
        .map(|p| {
            serde_json::from_str::<RunLog>(&read(p)?).with_context(|| format!("{} is not a run log", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = playback::write_profile(&playback::aggregate_profile(&logs)?);
    match &args.out {
        Some(path) => write(path, &csv),
        None => emit(&csv),
    }
}

fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "csv"));
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut records = Vec::new();
    for file in files {
        records.extend(report::parse_records(&read(&file)?).with_context(|| format!("{}", file.display()))?);
    }
    Ok(records)
}

fn render_report(args: &ReportArgs) -> Result<()> {
    let records = match &args.runs {
        None => report::bundled_runs(),
        Some(p) => load_records(p)?,
    };
    let table = ReportTable::build(&records)?;
    if args.json {
        print_json(&table)
    } else {
        emit(&table.render())
    }
}

fn dispatch(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Evaluate(a) => {
            return Ok(match evaluate(a)? {
                RunStatus::Success => ExitCode::SUCCESS,
                RunStatus::Failure => ExitCode::from(2),
            })
        }
        Command::Characterize(a) => characterize(a)?,
        Command::Cluster(a) => cluster(a)?,
        Command::Play(a) => play(a)?,
        Command::Profile(a) => profile(a)?,
        Command::Report(a) => render_report(a)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
