//! Fused training targets: mix the BC policy's distribution with the
//! demonstrated action, zero actions that would collide, renormalize.

use alloc::string::String;
use alloc::vec::Vec;

use crate::expert::DemonstrationRecord;
use crate::gridworld::{
    colliding_actions, step, Action, ActionDistribution, ActionSet, DistributionError, Observation,
    OccupancyGrid,
};
use crate::histpolicy::{forward_step, PolicyParams, RecurrentState};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FusionConfig {
    /// Weight on the BC policy distribution; `1 - alpha` goes to the
    /// demonstrated action.
    pub alpha: f64,
    /// Below this remaining mass the target falls back to uniform over the
    /// non-colliding actions.
    pub epsilon_mass: f64,
    /// When false no action is masked (the colliding set is left empty).
    pub collision_mask: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            epsilon_mass: 1e-9,
            collision_mask: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("Stop cannot be in the colliding set")]
    StopColliding,
    #[error("every action collides")]
    AllColliding,
    #[error("episode {episode}: map {map} not found")]
    MissingMap { episode: String, map: String },
    #[error("episode {episode}: replay diverges from the recorded collision flag at step {t}")]
    Replay { episode: String, t: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// One demonstrated step with its BC distribution and training target.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetRecord {
    pub episode_id: String,
    pub t: usize,
    pub obs: Observation,
    pub action: Action,
    pub collided: bool,
    pub p_sota: ActionDistribution,
    pub colliding: ActionSet,
    pub target: ActionDistribution,
}

pub fn build_target(
    p_sota: &ActionDistribution,
    gt: Action,
    colliding: ActionSet,
    cfg: &FusionConfig,
) -> Result<ActionDistribution, FusionError> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(FusionError::Alpha(cfg.alpha));
    }
    if colliding.contains(Action::Stop) {
        return Err(FusionError::StopColliding);
    }
    if colliding.len() == Action::COUNT {
        return Err(FusionError::AllColliding);
    }
    let mut m = [0.0; 6];
    for (i, v) in m.iter_mut().enumerate() {
        *v = cfg.alpha * p_sota.probs()[i];
    }
    m[gt.index()] += 1.0 - cfg.alpha;
    let mut removed = false;
    for a in colliding.iter() {
        removed |= m[a.index()] != 0.0;
        m[a.index()] = 0.0;
    }
    if !removed {
        return Ok(ActionDistribution::new(m)?);
    }
    if m.iter().sum::<f64>() > cfg.epsilon_mass {
        return Ok(ActionDistribution::normalized(m)?);
    }
    let mut u = [0.0; 6];
    for a in Action::ALL {
        if !colliding.contains(a) {
            u[a.index()] = 1.0;
        }
    }
    Ok(ActionDistribution::normalized(u)?)
}

/// Replays every demonstration from its start pose, threading the BC
/// policy's hidden state, and builds one target per step. The colliding set
/// is taken at the pose the step was decided from.
pub fn build_target_dataset<'a>(
    corpus: &[DemonstrationRecord],
    maps: impl Fn(&str) -> Option<&'a OccupancyGrid>,
    params: &PolicyParams,
    cfg: &FusionConfig,
) -> Result<Vec<TargetRecord>, FusionError> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(FusionError::Alpha(cfg.alpha));
    }
    let mut out = Vec::with_capacity(corpus.iter().map(|r| r.steps.len()).sum());
    for rec in corpus {
        let ep = &rec.episode;
        let grid = maps(&ep.map_id).ok_or_else(|| FusionError::MissingMap {
            episode: ep.id.clone(),
            map: ep.map_id.clone(),
        })?;
        let mut pose = ep.start;
        let mut state = RecurrentState::for_params(params);
        for (t, s) in rec.steps.iter().enumerate() {
            let (p_sota, next) = forward_step(params, &state, &s.obs);
            state = next;
            let colliding = if cfg.collision_mask {
                colliding_actions(grid, &pose)
            } else {
                ActionSet::EMPTY
            };
            let target = build_target(&p_sota, s.action, colliding, cfg)?;
            let moved = step(grid, &pose, s.action);
            if moved.collided != s.collided {
                return Err(FusionError::Replay {
                    episode: ep.id.clone(),
                    t,
                });
            }
            pose = moved.pose;
            out.push(TargetRecord {
                episode_id: ep.id.clone(),
                t,
                obs: s.obs.clone(),
                action: s.action,
                collided: s.collided,
                p_sota,
                colliding,
                target,
            });
        }
    }
    Ok(out)
}
