//! In-memory benchmark: maps, demonstrations, BC training, fused targets,
//! the three student arms and their evaluation.

use navfuse_core::backend::{ExpertBackend, HistBackend, StudentBackend};
use navfuse_core::eval::{evaluate, EvalConfig, EvalReport};
use navfuse_core::expert::{generate_demonstrations, DemoCorpus, ExpertConfig, ExpertError};
use navfuse_core::fusion::{build_target_dataset, FusionConfig, FusionError, TargetRecord};
use navfuse_core::gridworld::{
    generate_episodes, generate_map, Episode, EpisodeError, MapGenConfig, MapGenError, OccupancyGrid,
};
use navfuse_core::histpolicy::{train_bc_from, PolicyParams, TrainConfig, TrainError};
use navfuse_core::rng;
use navfuse_core::student::{train_student, StudentError, StudentParams, StudentTrainConfig, TargetMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Map(#[from] MapGenError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Student(#[from] StudentError),
}

/// A generated map and the id episodes refer to it by.
#[derive(Clone, Debug)]
pub struct NamedMap {
    pub id: String,
    pub grid: OccupancyGrid,
}

/// `count` maps named `<prefix>-000`, ... with map `i` seeded from
/// `(seed, i)`.
pub fn generate_maps(cfg: &MapGenConfig, prefix: &str, count: usize, seed: u64) -> Result<Vec<NamedMap>, MapGenError> {
    (0..count)
        .map(|i| {
            Ok(NamedMap {
                id: format!("{prefix}-{i:03}"),
                grid: generate_map(cfg, rng::derive(seed, i as u64))?,
            })
        })
        .collect()
}

/// `per_map` episodes on every map, ids `<map id>-<index>`.
pub fn generate_eval_episodes(
    maps: &[NamedMap],
    per_map: usize,
    seed: u64,
    d_range: (f64, f64),
) -> Result<Vec<Episode>, EpisodeError> {
    let mut out = Vec::with_capacity(maps.len() * per_map);
    for (i, m) in maps.iter().enumerate() {
        out.extend(generate_episodes(
            &m.grid,
            &m.id,
            &m.id,
            per_map,
            rng::derive(seed, i as u64),
            d_range.0,
            d_range.1,
        )?);
    }
    Ok(out)
}

pub fn find_map<'a>(maps: &'a [NamedMap], id: &str) -> Option<&'a OccupancyGrid> {
    maps.iter().find(|m| m.id == id).map(|m| &m.grid)
}

/// Pairs every episode with its map.
pub fn attach_maps<'a>(
    episodes: &'a [Episode],
    maps: &'a [NamedMap],
) -> Result<Vec<(&'a Episode, &'a OccupancyGrid)>, String> {
    episodes
        .iter()
        .map(|e| {
            find_map(maps, &e.map_id)
                .map(|g| (e, g))
                .ok_or_else(|| format!("episode `{}` refers to unknown map `{}`", e.id, e.map_id))
        })
        .collect()
}

/// Default desk benchmark: 150 training maps with 20 noisy demonstrations
/// each, 50 held-out maps with 10 evaluation episodes each, three student
/// seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub map: MapGenConfig,
    pub train_maps: usize,
    pub eval_maps: usize,
    pub demos_per_map: usize,
    pub episodes_per_map: usize,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub expert: ExpertConfig,
    pub bc: TrainConfig,
    pub fusion: FusionConfig,
    pub student: StudentTrainConfig,
    pub eval: EvalConfig,
    /// Seeds for student training and evaluation.
    pub seeds: Vec<u64>,
    /// Seeds maps and episodes.
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            map: MapGenConfig::default(),
            train_maps: 150,
            eval_maps: 50,
            demos_per_map: 20,
            episodes_per_map: 10,
            d_min_m: 1.5,
            d_max_m: 8.0,
            expert: ExpertConfig::default(),
            bc: TrainConfig::default(),
            fusion: FusionConfig::default(),
            student: StudentTrainConfig::default(),
            eval: EvalConfig::default(),
            seeds: vec![0, 1, 2],
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    fn train_map_seed(&self) -> u64 {
        rng::derive(self.seed, 0x7EA1)
    }

    fn eval_map_seed(&self) -> u64 {
        rng::derive(self.seed, 0xE7A1)
    }
}

/// Everything the benchmark generates before student training.
pub struct BenchmarkData {
    pub train_maps: Vec<NamedMap>,
    pub eval_maps: Vec<NamedMap>,
    pub corpus: DemoCorpus,
    pub episodes: Vec<Episode>,
}

pub fn generate_benchmark_data(cfg: &BenchmarkConfig) -> Result<BenchmarkData, PipelineError> {
    let train_maps = generate_maps(&cfg.map, "train", cfg.train_maps, cfg.train_map_seed())?;
    let eval_maps = generate_maps(&cfg.map, "eval", cfg.eval_maps, cfg.eval_map_seed())?;
    let corpus = generate_demonstrations(
        train_maps.iter().map(|m| (m.id.as_str(), &m.grid)),
        cfg.demos_per_map,
        &cfg.expert,
        (cfg.d_min_m, cfg.d_max_m),
    )?;
    let episodes = generate_eval_episodes(
        &eval_maps,
        cfg.episodes_per_map,
        rng::derive(cfg.seed, 0xE915),
        (cfg.d_min_m, cfg.d_max_m),
    )?;
    Ok(BenchmarkData {
        train_maps,
        eval_maps,
        corpus,
        episodes,
    })
}

pub fn train_bc_policy(
    corpus: &DemoCorpus,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<(PolicyParams, Vec<f64>), TrainError> {
    train_bc_from(PolicyParams::init(cfg.model, cfg.seed), &corpus.records, cfg, on_epoch)
}

/// Fused targets with the configured mask setting.
pub fn build_targets(
    data: &BenchmarkData,
    hist: &PolicyParams,
    cfg: &FusionConfig,
) -> Result<Vec<TargetRecord>, FusionError> {
    build_target_dataset(&data.corpus.records, |id| find_map(&data.train_maps, id), hist, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentRun {
    pub mode: TargetMode,
    pub seed: u64,
    pub final_loss: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub demos: usize,
    pub demo_steps: usize,
    pub bc_loss: Vec<f64>,
    pub expert: EvalReport,
    pub bc: EvalReport,
    pub students: Vec<StudentRun>,
}

impl BenchmarkResult {
    pub fn student(&self, mode: TargetMode, seed: u64) -> Option<&StudentRun> {
        self.students.iter().find(|s| s.mode == mode && s.seed == seed)
    }
}

/// Runs the whole benchmark. `progress` receives one line per stage.
pub fn run_benchmark(cfg: &BenchmarkConfig, progress: impl FnMut(&str)) -> Result<BenchmarkResult, PipelineError> {
    run_benchmark_keep(cfg, progress).map(|(result, _)| result)
}

/// Generated data and the trained BC policy, kept for further experiments.
pub struct BenchmarkArtifacts {
    pub data: BenchmarkData,
    pub bc: PolicyParams,
}

/// [`run_benchmark`] that also returns the data and BC policy it built.
pub fn run_benchmark_keep(
    cfg: &BenchmarkConfig,
    mut progress: impl FnMut(&str),
) -> Result<(BenchmarkResult, BenchmarkArtifacts), PipelineError> {
    let data = generate_benchmark_data(cfg)?;
    let demo_steps = data.corpus.records.iter().map(|r| r.steps.len()).sum();
    progress(&format!(
        "{} demonstrations ({demo_steps} steps, {} skipped), {} evaluation episodes",
        data.corpus.records.len(),
        data.corpus.skipped,
        data.episodes.len()
    ));
    let pairs = attach_maps(&data.episodes, &data.eval_maps).expect("episodes come from the eval maps");
    let expert = evaluate(|_| ExpertBackend::new(), &pairs, &[0], &cfg.eval);

    let (hist, bc_loss) = train_bc_policy(&data.corpus, &cfg.bc, |e, l| progress(&format!("bc epoch {e}: loss {l:.4}")))?;
    let bc = evaluate(|_| HistBackend::new(&hist), &pairs, &[0], &cfg.eval);
    progress(&format!("bc success {:.3}", bc.aggregates.success_mean));

    let fused = build_targets(&data, &hist, &cfg.fusion)?;
    let nomask = build_targets(
        &data,
        &hist,
        &FusionConfig {
            collision_mask: false,
            ..cfg.fusion
        },
    )?;
    let mut students = Vec::new();
    for &seed in &cfg.seeds {
        for mode in TargetMode::ALL {
            let dataset = if mode == TargetMode::FusedNomask { &nomask } else { &fused };
            let sc = StudentTrainConfig {
                target_mode: mode,
                seed,
                ..cfg.student
            };
            let trained = train_student(dataset, &hist, &sc)?;
            let params: &StudentParams = &trained.params;
            let report = evaluate(
                |_| StudentBackend::new(params, &hist).expect("student trained against this policy"),
                &pairs,
                &[seed],
                &cfg.eval,
            );
            progress(&format!(
                "student {} seed {seed}: success {:.3}, collisions {:.2}",
                mode.label(),
                report.aggregates.success_mean,
                report.aggregates.collision_mean
            ));
            students.push(StudentRun {
                mode,
                seed,
                final_loss: trained.loss_curve.last().map_or(f64::NAN, |p| p.loss),
                report,
            });
        }
    }
    let result = BenchmarkResult {
        demos: data.corpus.records.len(),
        demo_steps,
        bc_loss,
        expert,
        bc,
        students,
    };
    Ok((result, BenchmarkArtifacts { data, bc: hist }))
}
