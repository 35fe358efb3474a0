//! The `navfuse` command line.
//!
//! Every subcommand accepts `--config <file.json>`; the file's keys are the
//! flag names in snake_case, and flags given on the command line win.
//! Exit status is 0 on success, 1 for usage errors and 2 for runtime
//! failures.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use navfuse_core::backend::{ExpertBackend, HistBackend, PolicyBackend, RandomBackend, StudentBackend};
use navfuse_core::eval::{evaluate, render_trajectory_svg, run_episode_traced, EvalConfig, Selection};
use navfuse_core::expert::{generate_demonstrations, ExpertConfig};
use navfuse_core::fusion::{build_target_dataset, FusionConfig};
use navfuse_core::gridworld::{Episode, MapGenConfig, OccupancyGrid};
use navfuse_core::histpolicy::{train_bc_from, HistConfig, PolicyParams, TrainConfig};
use navfuse_core::student::{train_student, StudentParams, StudentTrainConfig, TargetMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{self, TargetWriter};
use crate::pipeline::{self, generate_eval_episodes, generate_maps, BenchmarkConfig, NamedMap};
use crate::remote::{resolve_endpoint, RemoteBackend, RemoteClient, RemoteConfig};

#[derive(Parser, Debug)]
#[command(name = "navfuse", version, about = "Object-goal navigation with fused soft-target policies")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate random floor-plan maps.
    GenMaps(WithConfig<GenMapsOpts>),
    /// Sample evaluation episodes on a directory of maps.
    GenEpisodes(WithConfig<GenEpisodesOpts>),
    /// Roll out the noisy expert to build a demonstration corpus.
    GenDemos(WithConfig<GenDemosOpts>),
    /// Train the recurrent behavior-cloning policy.
    TrainBc(WithConfig<TrainBcOpts>),
    /// Build fused training targets from demonstrations and a BC policy.
    BuildTargets(WithConfig<BuildTargetsOpts>),
    /// Train a student policy on a target dataset.
    TrainStudent(WithConfig<TrainStudentOpts>),
    /// Evaluate a policy backend on an episode file.
    Eval(WithConfig<EvalOpts>),
    /// Export a report's per-episode rows as CSV.
    Report(WithConfig<ReportOpts>),
    /// Render one episode's trajectory as SVG.
    Render(WithConfig<RenderOpts>),
    /// Run the whole benchmark in memory and write a summary.
    Benchmark(WithConfig<BenchmarkOpts>),
}

#[derive(Args, Debug)]
pub struct WithConfig<T: Args> {
    /// JSON file with default values for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub opts: T,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenMapsOpts {
    /// Directory to write `<prefix>-NNN.json` into.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Number of maps [default: 50].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// File name prefix [default: map].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    /// Map width in cells [default: 40].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    /// Map height in cells [default: 40].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    /// Target occupied fraction [default: 0.15].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_density: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenEpisodesOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps_dir: Option<PathBuf>,
    /// Episodes per map [default: 10].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_map: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Minimum start-to-goal geodesic distance [default: 1.5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    /// Maximum start-to-goal geodesic distance [default: 8.0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    /// Episode file (JSON Lines).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDemosOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maps_dir: Option<PathBuf>,
    /// Demonstrations per map [default: 20].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_map: Option<usize>,
    /// Probability of a random non-Stop action [default: 0.15].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_eps: Option<f64>,
    /// [default: 500]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// [default: 1.5]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    /// [default: 8.0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<f64>,
    /// Demonstration corpus (JSON Lines).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBcOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demos: Option<PathBuf>,
    /// Parameter file to write.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// [default: 12]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    /// [default: 8]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_episodes: Option<usize>,
    /// [default: 5.0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// GRU hidden size [default: 64].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    /// Also write the per-epoch loss as JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTargetsOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demos: Option<PathBuf>,
    /// BC policy parameter file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<PathBuf>,
    /// Target dataset (JSON Lines).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Weight on the BC distribution [default: 0.8].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Remaining-mass threshold for the uniform fallback [default: 1e-9].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_mass: Option<f64>,
    /// Keep colliding actions in the targets.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_collision_mask: bool,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainStudentOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// [default: fused]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    /// [default: 20000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    /// [default: 6]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Hidden layer width [default: 128].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Also write the loss curve as JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeArg {
    Fused,
    Direct,
    FusedNomask,
}

impl From<ModeArg> for TargetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Fused => TargetMode::Fused,
            ModeArg::Direct => TargetMode::Direct,
            ModeArg::FusedNomask => TargetMode::FusedNomask,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Expert,
    Random,
    Bc,
    Student,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectArg {
    Argmax,
    Sample,
}

impl From<SelectArg> for Selection {
    fn from(s: SelectArg) -> Self {
        match s {
            SelectArg::Argmax => Selection::Argmax,
            SelectArg::Sample => Selection::Sample,
        }
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOpts {
    /// Episode file (JSON Lines).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<PathBuf>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    /// BC policy parameters (bc, student and remote backends).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<PathBuf>,
    /// Student parameters (student backend).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub student: Option<PathBuf>,
    /// Completion endpoint; falls back to $NAVFUSE_LLM_URL.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_url: Option<String>,
    /// Per-request timeout in seconds [default: 30].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    /// [default: 2]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    /// Prompt template variant [default: 0].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<usize>,
    /// [default: argmax]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectArg>,
    /// Comma-separated evaluation seeds [default: 0].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// [default: 500]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Report the unclamped SoftSPL formula.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_clamp_softspl: bool,
    /// Report file (JSON).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOpts {
    /// Report JSON written by `eval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderOpts {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episode_id: Option<String>,
    /// [default: expert]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub student: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm_url: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_retries: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectArg>,
    /// [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// SVG file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkOpts {
    /// Summary JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Comma-separated student seeds [default: 0,1,2].
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Benchmark settings; config file only.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<io::FormatError> for CliError {
    fn from(e: io::FormatError) -> Self {
        CliError::Runtime(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("--{} is required (or config key `{name}`)", name.replace('_', "-"))))
}

/// Overlays the flags given on the command line onto the config file.
fn resolve<T: Args + Serialize + DeserializeOwned>(w: WithConfig<T>) -> Result<T, CliError> {
    let Some(path) = w.config else {
        return Ok(w.opts);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(base_map) = &mut base else {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    };
    let Value::Object(flags) = serde_json::to_value(&w.opts).map_err(|e| usage(e.to_string()))? else {
        unreachable!("option structs serialize to objects")
    };
    base_map.extend(flags);
    serde_path_to_error::deserialize(base)
        .map_err(|e| usage(format!("config {}: key `{}`: {}", path.display(), e.path(), e.inner())))
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenMaps(w) => gen_maps(resolve(w)?),
        Command::GenEpisodes(w) => gen_episodes(resolve(w)?),
        Command::GenDemos(w) => gen_demos(resolve(w)?),
        Command::TrainBc(w) => train_bc(resolve(w)?),
        Command::BuildTargets(w) => build_targets(resolve(w)?),
        Command::TrainStudent(w) => train_student_cmd(resolve(w)?),
        Command::Eval(w) => eval(resolve(w)?),
        Command::Report(w) => report(resolve(w)?),
        Command::Render(w) => render(resolve(w)?),
        Command::Benchmark(w) => benchmark(resolve(w)?),
    }
}

fn gen_maps(o: GenMapsOpts) -> Result<(), CliError> {
    let out_dir = required(o.out_dir, "out_dir")?;
    let defaults = MapGenConfig::default();
    let cfg = MapGenConfig {
        width: o.width.unwrap_or(defaults.width),
        height: o.height.unwrap_or(defaults.height),
        obstacle_density: o.obstacle_density.unwrap_or(defaults.obstacle_density),
        ..defaults
    };
    let prefix = o.prefix.unwrap_or_else(|| "map".into());
    let maps = generate_maps(&cfg, &prefix, o.count.unwrap_or(50), o.seed.unwrap_or(0)).map_err(|e| usage(e.to_string()))?;
    for m in &maps {
        io::write_map(&out_dir.join(format!("{}.json", m.id)), &m.grid)?;
    }
    log::info!("wrote {} maps to {}", maps.len(), out_dir.display());
    Ok(())
}

/// Loads every map in `dir`, named by file stem, with the path to store
/// in files written at `referrer`.
fn load_map_dir(dir: &Path, referrer: &Path) -> Result<(Vec<NamedMap>, HashMap<String, String>), CliError> {
    if let Some(parent) = referrer.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut maps = Vec::new();
    let mut stored = HashMap::new();
    for path in io::list_maps(dir)? {
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        stored.insert(id.clone(), io::path_for_storage(referrer, &path));
        maps.push(NamedMap {
            id,
            grid: io::read_map(&path)?,
        });
    }
    Ok((maps, stored))
}

fn gen_episodes(o: GenEpisodesOpts) -> Result<(), CliError> {
    let maps_dir = required(o.maps_dir, "maps_dir")?;
    let out = required(o.out, "out")?;
    let (maps, stored) = load_map_dir(&maps_dir, &out)?;
    let range = (o.d_min.unwrap_or(1.5), o.d_max.unwrap_or(8.0));
    let mut episodes = generate_eval_episodes(&maps, o.per_map.unwrap_or(10), o.seed.unwrap_or(0), range)
        .context("generating episodes")?;
    for e in &mut episodes {
        e.map_id = stored[&e.map_id].clone();
    }
    io::write_episodes(&out, &episodes)?;
    log::info!("wrote {} episodes to {}", episodes.len(), out.display());
    Ok(())
}

fn gen_demos(o: GenDemosOpts) -> Result<(), CliError> {
    let maps_dir = required(o.maps_dir, "maps_dir")?;
    let out = required(o.out, "out")?;
    let defaults = ExpertConfig::default();
    let cfg = ExpertConfig {
        noise_eps: o.noise_eps.unwrap_or(defaults.noise_eps),
        max_steps: o.max_steps.unwrap_or(defaults.max_steps),
        seed: o.seed.unwrap_or(defaults.seed),
    };
    if !(0.0..=1.0).contains(&cfg.noise_eps) {
        return Err(usage(format!("--noise-eps must lie in [0, 1], got {}", cfg.noise_eps)));
    }
    let (maps, stored) = load_map_dir(&maps_dir, &out)?;
    let range = (o.d_min.unwrap_or(1.5), o.d_max.unwrap_or(8.0));
    let mut corpus = generate_demonstrations(
        maps.iter().map(|m| (m.id.as_str(), &m.grid)),
        o.per_map.unwrap_or(20),
        &cfg,
        range,
    )
    .context("generating demonstrations")?;
    for r in &mut corpus.records {
        r.episode.map_id = stored[&r.episode.map_id].clone();
    }
    io::write_demos(&out, &corpus.records)?;
    log::info!(
        "wrote {} demonstrations to {} ({} skipped)",
        corpus.records.len(),
        out.display(),
        corpus.skipped
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).context("serializing")?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn train_bc(o: TrainBcOpts) -> Result<(), CliError> {
    let demos = required(o.demos, "demos")?;
    let out = required(o.out, "out")?;
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
        epochs: o.epochs.unwrap_or(d.epochs),
        batch_episodes: o.batch_episodes.unwrap_or(d.batch_episodes),
        clip_norm: o.clip_norm.unwrap_or(d.clip_norm),
        seed: o.seed.unwrap_or(d.seed),
        model: HistConfig {
            hidden: o.hidden.unwrap_or(d.model.hidden),
            ..d.model
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = io::read_demos(&demos)?.collect::<Result<Vec<_>, _>>()?;
    let init = PolicyParams::init(cfg.model, cfg.seed);
    let (params, losses) = train_bc_from(init, &corpus, &cfg, |e, l| log::info!("epoch {e}: loss {l:.4}"))
        .context("training the BC policy")?;
    io::write_policy(&out, &params)?;
    if let Some(p) = o.loss_out {
        write_json(&p, &losses)?;
    }
    Ok(())
}

/// Map cache keyed by the resolved path.
struct MapCache<'a> {
    referrer: &'a Path,
    maps: HashMap<String, OccupancyGrid>,
}

impl<'a> MapCache<'a> {
    fn new(referrer: &'a Path) -> Self {
        Self {
            referrer,
            maps: HashMap::new(),
        }
    }

    fn load(&mut self, stored: &str) -> Result<(), CliError> {
        if !self.maps.contains_key(stored) {
            let grid = io::read_map(&io::resolve_relative(self.referrer, stored))?;
            self.maps.insert(stored.to_string(), grid);
        }
        Ok(())
    }

    fn get(&self, stored: &str) -> Option<&OccupancyGrid> {
        self.maps.get(stored)
    }
}

fn build_targets(o: BuildTargetsOpts) -> Result<(), CliError> {
    let demos = required(o.demos, "demos")?;
    let bc = required(o.bc, "bc")?;
    let out = required(o.out, "out")?;
    let d = FusionConfig::default();
    let cfg = FusionConfig {
        alpha: o.alpha.unwrap_or(d.alpha),
        epsilon_mass: o.epsilon_mass.unwrap_or(d.epsilon_mass),
        collision_mask: !o.no_collision_mask,
    };
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(usage(format!("--alpha must lie in [0, 1], got {}", cfg.alpha)));
    }
    let hist = io::read_policy(&bc)?;
    let mut maps = MapCache::new(&demos);
    let file = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = TargetWriter::new(std::io::BufWriter::new(file));
    let mut n = 0usize;
    for rec in io::read_demos(&demos)? {
        let rec = rec?;
        maps.load(&rec.episode.map_id)?;
        let targets = build_target_dataset(std::slice::from_ref(&rec), |id| maps.get(id), &hist, &cfg)
            .context("building targets")?;
        for t in &targets {
            w.write(t).with_context(|| format!("writing {}", out.display()))?;
        }
        n += targets.len();
    }
    w.finish().with_context(|| format!("writing {}", out.display()))?;
    log::info!("wrote {n} targets to {}", out.display());
    Ok(())
}

fn train_student_cmd(o: TrainStudentOpts) -> Result<(), CliError> {
    let targets = required(o.targets, "targets")?;
    let bc = required(o.bc, "bc")?;
    let out = required(o.out, "out")?;
    let d = StudentTrainConfig::default();
    let cfg = StudentTrainConfig {
        target_mode: o.mode.map_or(d.target_mode, TargetMode::from),
        learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
        iterations: o.iterations.unwrap_or(d.iterations),
        batch_size: o.batch_size.unwrap_or(d.batch_size),
        width: o.width.unwrap_or(d.width),
        clip_norm: o.clip_norm.unwrap_or(d.clip_norm),
        seed: o.seed.unwrap_or(d.seed),
        ..d
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let hist = io::read_policy(&bc)?;
    let data = io::read_targets(&targets)?;
    let trained = train_student(&data, &hist, &cfg).context("training the student")?;
    io::write_student(&out, &trained.params)?;
    if let Some(p) = o.loss_out {
        write_json(&p, &trained.loss_curve)?;
    }
    Ok(())
}

/// Parameters and settings a backend is built from.
struct BackendSource {
    kind: BackendKind,
    hist: Option<PolicyParams>,
    student: Option<StudentParams>,
    remote: Option<RemoteConfig>,
}

impl BackendSource {
    #[allow(clippy::too_many_arguments)]
    fn load(
        kind: BackendKind,
        bc: Option<PathBuf>,
        student: Option<PathBuf>,
        llm_url: Option<String>,
        timeout_s: Option<f64>,
        max_retries: Option<u32>,
        variant: Option<usize>,
    ) -> Result<Self, CliError> {
        let needs_bc = matches!(kind, BackendKind::Bc | BackendKind::Student | BackendKind::Remote);
        let hist = if needs_bc {
            Some(io::read_policy(&required(bc, "bc")?)?)
        } else {
            None
        };
        let student = if kind == BackendKind::Student {
            Some(io::read_student(&required(student, "student")?)?)
        } else {
            None
        };
        let remote = if kind == BackendKind::Remote {
            let d = RemoteConfig::default();
            let cfg = RemoteConfig {
                endpoint: resolve_endpoint(llm_url.as_deref()).unwrap_or_default(),
                timeout_s: timeout_s.unwrap_or(d.timeout_s),
                max_retries: max_retries.unwrap_or(d.max_retries),
                variant: variant.unwrap_or(d.variant),
            };
            cfg.validate().map_err(|e| usage(e.to_string()))?;
            Some(cfg)
        } else {
            None
        };
        let source = Self {
            kind,
            hist,
            student,
            remote,
        };
        // surface shape mismatches before any episode runs
        source.backend(0)?;
        Ok(source)
    }

    fn backend(&self, seed: u64) -> Result<Box<dyn PolicyBackend + '_>, CliError> {
        Ok(match self.kind {
            BackendKind::Expert => Box::new(ExpertBackend::new()),
            BackendKind::Random => Box::new(RandomBackend::new(seed)),
            BackendKind::Bc => Box::new(HistBackend::new(self.hist.as_ref().expect("loaded"))),
            BackendKind::Student => Box::new(
                StudentBackend::new(self.student.as_ref().expect("loaded"), self.hist.as_ref().expect("loaded"))
                    .map_err(|e| anyhow!("student and BC parameters do not fit together: {e}"))?,
            ),
            BackendKind::Remote => {
                let client = RemoteClient::new(self.remote.clone().expect("loaded")).map_err(|e| usage(e.to_string()))?;
                Box::new(RemoteBackend::new(client, self.hist.as_ref().expect("loaded")))
            }
        })
    }
}

fn load_episodes(path: &Path) -> Result<(Vec<Episode>, MapCache<'_>), CliError> {
    let episodes = io::read_episodes(path)?;
    let mut maps = MapCache::new(path);
    for e in &episodes {
        maps.load(&e.map_id)?;
    }
    Ok((episodes, maps))
}

fn eval(o: EvalOpts) -> Result<(), CliError> {
    let episodes_path = required(o.episodes, "episodes")?;
    let out = required(o.out, "out")?;
    let kind = o.backend.unwrap_or(BackendKind::Expert);
    let source = BackendSource::load(kind, o.bc, o.student, o.llm_url, o.timeout_s, o.max_retries, o.variant)?;
    let cfg = EvalConfig {
        max_steps: o.max_steps.unwrap_or(EvalConfig::default().max_steps),
        selection: o.select.map_or(Selection::Argmax, Selection::from),
        clamp_softspl: !o.no_clamp_softspl,
    };
    let seeds = o.seeds.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(usage("--seeds must list at least one seed"));
    }
    let (episodes, maps) = load_episodes(&episodes_path)?;
    let pairs: Vec<(&Episode, &OccupancyGrid)> = episodes
        .iter()
        .map(|e| (e, maps.get(&e.map_id).expect("loaded above")))
        .collect();
    let report = evaluate(|s| source.backend(s).expect("validated in load"), &pairs, &seeds, &cfg);
    io::write_report(&out, &report)?;
    let a = &report.aggregates;
    eprintln!(
        "{}: {} episodes, success {:.4}, softspl {:.4}, collisions {:.3}, errors {}, fallbacks {}",
        report.config.backend, a.episodes, a.success_mean, a.softspl_mean, a.collision_mean, a.errors, a.fallbacks
    );
    Ok(())
}

fn report(o: ReportOpts) -> Result<(), CliError> {
    let input = required(o.input, "input")?;
    let report = io::read_report(&input)?;
    match o.out {
        Some(p) => {
            let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
            io::write_report_csv(&report, f).context("writing CSV")?;
        }
        None => {
            let stdout = std::io::stdout();
            io::write_report_csv(&report, stdout.lock()).context("writing CSV")?;
        }
    }
    let a = &report.aggregates;
    eprintln!(
        "mean success {:.4}, mean softspl {:.4}, mean collisions {:.3} over {} rows",
        a.success_mean, a.softspl_mean, a.collision_mean, a.episodes
    );
    Ok(())
}

fn render(o: RenderOpts) -> Result<(), CliError> {
    let episodes_path = required(o.episodes, "episodes")?;
    let id = required(o.episode_id, "episode_id")?;
    let out = required(o.out, "out")?;
    let kind = o.backend.unwrap_or(BackendKind::Expert);
    let source = BackendSource::load(kind, o.bc, o.student, o.llm_url, o.timeout_s, o.max_retries, o.variant)?;
    let (episodes, maps) = load_episodes(&episodes_path)?;
    let ep = episodes
        .iter()
        .find(|e| e.id == id)
        .ok_or_else(|| usage(format!("no episode `{id}` in {}", episodes_path.display())))?;
    let grid = maps.get(&ep.map_id).expect("loaded above");
    let cfg = EvalConfig {
        max_steps: o.max_steps.unwrap_or(EvalConfig::default().max_steps),
        selection: o.select.map_or(Selection::Argmax, Selection::from),
        ..EvalConfig::default()
    };
    let seed = o.seed.unwrap_or(0);
    let mut backend = source.backend(seed)?;
    let (result, traj) = run_episode_traced(&mut backend, grid, ep, &cfg, seed);
    let svg = render_trajectory_svg(grid, ep, &traj);
    let mut f = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    f.write_all(svg.as_bytes()).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "{}: success {}, {} steps, {} collisions",
        result.episode_id, result.success, result.steps, result.collision_count
    );
    Ok(())
}

fn benchmark(o: BenchmarkOpts) -> Result<(), CliError> {
    let out = required(o.out, "out")?;
    let mut cfg = o.benchmark.unwrap_or_default();
    if let Some(seeds) = o.seeds {
        cfg.seeds = seeds;
    }
    let result = pipeline::run_benchmark(&cfg, |line| log::info!("{line}")).context("running the benchmark")?;
    write_json(&out, &result)?;
    eprintln!(
        "expert success {:.3}, bc success {:.3}",
        result.expert.aggregates.success_mean, result.bc.aggregates.success_mean
    );
    for s in &result.students {
        eprintln!(
            "student {} seed {}: success {:.3}, softspl {:.3}, collisions {:.2}",
            s.mode.label(),
            s.seed,
            s.report.aggregates.success_mean,
            s.report.aggregates.softspl_mean,
            s.report.aggregates.collision_mean
        );
    }
    Ok(())
}
