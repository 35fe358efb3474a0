//! Episode rollouts, Success / SoftSPL / collision metrics and report
//! aggregation.

mod svg;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::backend::PolicyBackend;
use crate::gridworld::{
    observe, step, Action, ActionDistribution, Episode, EpisodeGeometry, OccupancyGrid, Pose, STEP_LENGTH_M,
};
use crate::rng;

pub use svg::render_trajectory_svg;

pub const DEFAULT_MAX_STEPS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Selection {
    /// Most probable action; ties go to the lowest index.
    #[default]
    Argmax,
    /// Draw from the distribution with a per-(seed, episode) stream.
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EvalConfig {
    pub max_steps: usize,
    pub selection: Selection,
    /// Clamp SoftSPL's progress factor at zero.
    pub clamp_softspl: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            selection: Selection::Argmax,
            clamp_softspl: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("initial distance must be positive, got {0}")]
    InitialDistance(f64),
    #[error("shortest path length must be positive, got {0}")]
    ShortestPath(f64),
    #[error("path length must be non-negative, got {0}")]
    PathLength(f64),
}

/// `(1 - d_t / d_init) * s / max(s, p)`, with the first factor clamped at 0
/// when `clamp` is set.
pub fn softspl(d_init: f64, d_t: f64, s: f64, p: f64, clamp: bool) -> Result<f64, MetricError> {
    if !(d_init > 0.0) {
        return Err(MetricError::InitialDistance(d_init));
    }
    if !(s > 0.0) {
        return Err(MetricError::ShortestPath(s));
    }
    if !(p >= 0.0) {
        return Err(MetricError::PathLength(p));
    }
    let mut progress = 1.0 - d_t / d_init;
    if clamp {
        progress = progress.max(0.0);
    }
    Ok(progress * s / s.max(p))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeResult {
    pub episode_id: String,
    pub seed: u64,
    pub success: bool,
    pub softspl: f64,
    pub collision_count: usize,
    pub steps: usize,
    pub path_length_m: f64,
    /// Geodesic distance to the nearest goal instance at termination.
    pub d_t_m: f64,
    pub fallback_count: usize,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub error: Option<String>,
}

/// Poses visited (including the start), the action taken from each and
/// whether it collided.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub actions: Vec<Action>,
    pub collided: Vec<bool>,
}

fn select(d: &ActionDistribution, selection: Selection, r: &mut rng::Rng) -> Action {
    match selection {
        Selection::Argmax => d.argmax(),
        Selection::Sample => {
            let u: f64 = r.gen();
            let mut acc = 0.0;
            for a in Action::ALL {
                acc += d.prob(a);
                if u < acc {
                    return a;
                }
            }
            // rounding left u above the cumulative sum: last action with mass
            Action::ALL
                .into_iter()
                .rev()
                .find(|&a| d.prob(a) > 0.0)
                .unwrap_or(Action::Stop)
        }
    }
}

/// Runs one episode; backend failures end the episode and are reported in
/// the row's `error` field.
pub fn run_episode(
    backend: &mut dyn PolicyBackend,
    grid: &OccupancyGrid,
    episode: &Episode,
    cfg: &EvalConfig,
    seed: u64,
) -> EpisodeResult {
    run(backend, grid, episode, cfg, seed, None)
}

pub fn run_episode_traced(
    backend: &mut dyn PolicyBackend,
    grid: &OccupancyGrid,
    episode: &Episode,
    cfg: &EvalConfig,
    seed: u64,
) -> (EpisodeResult, Trajectory) {
    let mut trace = Trajectory::default();
    let res = run(backend, grid, episode, cfg, seed, Some(&mut trace));
    (res, trace)
}

fn run(
    backend: &mut dyn PolicyBackend,
    grid: &OccupancyGrid,
    episode: &Episode,
    cfg: &EvalConfig,
    seed: u64,
    mut trace: Option<&mut Trajectory>,
) -> EpisodeResult {
    let geo = EpisodeGeometry::new(grid, episode.goal);
    let fallbacks_before = backend.fallback_count();
    let mut r = rng::seeded(rng::derive(seed, rng::hash_str(&episode.id)));
    let mut pose = episode.start;
    let mut prev = None;
    let mut collided_last = false;
    let mut steps = 0;
    let mut collisions = 0;
    let mut forward_moves = 0usize;
    let mut stopped = false;
    let mut error = backend.reset(episode, grid).err().map(|e| e.to_string());
    if let Some(t) = trace.as_deref_mut() {
        t.poses.push(pose);
    }

    while error.is_none() && steps < cfg.max_steps {
        let obs = observe(grid, &pose, episode, prev, collided_last);
        let d = match backend.act(&obs, &pose) {
            Ok(d) => d,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let action = select(&d, cfg.selection, &mut r);
        let out = step(grid, &pose, action);
        steps += 1;
        collisions += usize::from(out.collided);
        forward_moves += usize::from(action == Action::MoveForward && !out.collided);
        pose = out.pose;
        prev = Some(action);
        collided_last = out.collided;
        if let Some(t) = trace.as_deref_mut() {
            t.poses.push(pose);
            t.actions.push(action);
            t.collided.push(out.collided);
        }
        if out.stopped {
            stopped = true;
            break;
        }
    }

    let cell = pose.cell();
    let d_t_m = geo.goal.meters(cell);
    let success = error.is_none() && stopped && d_t_m <= crate::gridworld::SUCCESS_RADIUS_M;
    let path_length_m = STEP_LENGTH_M * forward_moves as f64;
    let d_init = geo.region.meters(episode.start.cell());
    let softspl = if error.is_some() {
        0.0
    } else {
        let d_t_region = geo.region.meters(cell);
        match softspl(d_init, d_t_region, d_init, path_length_m, cfg.clamp_softspl) {
            Ok(v) => v,
            Err(e) => {
                error = Some(e.to_string());
                0.0
            }
        }
    };
    EpisodeResult {
        episode_id: episode.id.clone(),
        seed,
        success,
        softspl,
        collision_count: collisions,
        steps,
        path_length_m,
        d_t_m,
        fallback_count: backend.fallback_count() - fallbacks_before,
        error,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregates {
    pub episodes: usize,
    pub success_mean: f64,
    pub softspl_mean: f64,
    pub collision_mean: f64,
    pub errors: usize,
    pub fallbacks: usize,
}

pub fn aggregate<'a>(rows: impl IntoIterator<Item = &'a EpisodeResult>) -> Aggregates {
    let mut a = Aggregates::default();
    let (mut s, mut spl, mut c) = (0.0, 0.0, 0.0);
    for r in rows {
        a.episodes += 1;
        s += f64::from(u8::from(r.success));
        spl += r.softspl;
        c += r.collision_count as f64;
        a.errors += usize::from(r.error.is_some());
        a.fallbacks += r.fallback_count;
    }
    if a.episodes > 0 {
        let n = a.episodes as f64;
        a.success_mean = s / n;
        a.softspl_mean = spl / n;
        a.collision_mean = c / n;
    }
    a
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedSummary {
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub aggregates: Aggregates,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportConfig {
    pub backend: String,
    pub seeds: Vec<u64>,
    pub selection: Selection,
    pub max_steps: usize,
    pub clamp_softspl: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub config: ReportConfig,
    pub per_episode: Vec<EpisodeResult>,
    pub aggregates: Aggregates,
    pub per_seed: Vec<SeedSummary>,
}

impl EvalReport {
    /// Builds a report from rows, ordering them by episode id then seed.
    pub fn from_rows(config: ReportConfig, mut rows: Vec<EpisodeResult>) -> Self {
        rows.sort_by(|a, b| a.episode_id.cmp(&b.episode_id).then(a.seed.cmp(&b.seed)));
        let mut by_seed: BTreeMap<u64, Vec<&EpisodeResult>> = BTreeMap::new();
        for r in &rows {
            by_seed.entry(r.seed).or_default().push(r);
        }
        let per_seed = by_seed
            .into_iter()
            .map(|(seed, rs)| SeedSummary {
                seed,
                aggregates: aggregate(rs),
            })
            .collect();
        Self {
            aggregates: aggregate(&rows),
            config,
            per_episode: rows,
            per_seed,
        }
    }
}

/// Runs every (episode, seed) pair. `make_backend(seed)` supplies a fresh
/// backend for each seed.
pub fn evaluate<B: PolicyBackend>(
    mut make_backend: impl FnMut(u64) -> B,
    episodes: &[(&Episode, &OccupancyGrid)],
    seeds: &[u64],
    cfg: &EvalConfig,
) -> EvalReport {
    let mut rows = Vec::with_capacity(episodes.len() * seeds.len());
    let mut name = String::new();
    for &seed in seeds {
        let mut backend = make_backend(seed);
        name = backend.name().to_string();
        for (ep, grid) in episodes {
            rows.push(run_episode(&mut backend, grid, ep, cfg, seed));
        }
    }
    let config = ReportConfig {
        backend: name,
        seeds: seeds.to_vec(),
        selection: cfg.selection,
        max_steps: cfg.max_steps,
        clamp_softspl: cfg.clamp_softspl,
    };
    EvalReport::from_rows(config, rows)
}

#[cfg(test)]
mod tests;
