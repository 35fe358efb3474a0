use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::action::GoalCategory;
use super::geodesic::{distance_field, DistanceField};
use super::grid::{Cell, OccupancyGrid};
use super::motion::Pose;
use crate::rng;

/// A stop within this geodesic distance of a goal instance counts as success.
pub const SUCCESS_RADIUS_M: f64 = 1.0;

const START_RETRIES: usize = 10_000;

/// One navigation task.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Episode {
    pub id: String,
    /// Map the episode runs on; in files this is the map's path.
    #[cfg_attr(feature = "serde", serde(rename = "map_path"))]
    pub map_id: String,
    pub start: Pose,
    pub goal: GoalCategory,
    /// Geodesic distance from the start cell to the nearest goal instance.
    pub d_init_m: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodeError {
    #[error("map has no {0} instance")]
    NoGoalInstance(GoalCategory),
    #[error("no start with goal distance in [{d_min}, {d_max}] m after {tries} tries")]
    NoValidStart { d_min: f64, d_max: f64, tries: usize },
    #[error("invalid distance range [{d_min}, {d_max}]")]
    BadRange { d_min: f64, d_max: f64 },
}

/// Distance fields an episode is scored against.
///
/// `goal` measures distance to the goal instances; `region` measures distance
/// to the success region (free cells within [`SUCCESS_RADIUS_M`] of a goal),
/// which is what SoftSPL uses for `d_init`, `d_T` and the shortest path `s`.
#[derive(Clone, Debug)]
pub struct EpisodeGeometry {
    pub goal: DistanceField,
    pub region: DistanceField,
    goal_cells: Vec<Cell>,
    region_cells: Vec<Cell>,
}

impl EpisodeGeometry {
    pub fn new(grid: &OccupancyGrid, category: GoalCategory) -> Self {
        let goal_cells = grid.goals(category).to_vec();
        let goal = distance_field(grid, &goal_cells);
        let region_cells: Vec<Cell> = grid
            .free_cells()
            .filter(|&c| goal.meters(c) <= SUCCESS_RADIUS_M)
            .collect();
        let region = distance_field(grid, &region_cells);
        Self {
            goal,
            region,
            goal_cells,
            region_cells,
        }
    }

    pub fn goal_cells(&self) -> &[Cell] {
        &self.goal_cells
    }

    pub fn region_cells(&self) -> &[Cell] {
        &self.region_cells
    }

    pub fn in_success_region(&self, c: Cell) -> bool {
        self.goal.meters(c) <= SUCCESS_RADIUS_M
    }
}

/// Samples a start pose for `category` with goal distance in `[d_min, d_max]`.
pub fn generate_episode(
    grid: &OccupancyGrid,
    map_id: &str,
    id: &str,
    category: GoalCategory,
    seed: u64,
    d_min: f64,
    d_max: f64,
) -> Result<Episode, EpisodeError> {
    if !(d_min <= d_max) || d_min < 0.0 {
        return Err(EpisodeError::BadRange { d_min, d_max });
    }
    let goals = grid.goals(category);
    if goals.is_empty() {
        return Err(EpisodeError::NoGoalInstance(category));
    }
    let field = distance_field(grid, goals);
    let free: Vec<Cell> = grid.free_cells().collect();
    let mut r = rng::seeded(seed);
    for _ in 0..START_RETRIES {
        let cell = free[r.gen_range(0..free.len())];
        let heading = 30 * r.gen_range(0..12);
        let d = field.meters(cell);
        if d >= d_min && d <= d_max {
            return Ok(Episode {
                id: id.into(),
                map_id: map_id.into(),
                start: Pose::at_cell(cell, heading),
                goal: category,
                d_init_m: d,
            });
        }
    }
    Err(EpisodeError::NoValidStart {
        d_min,
        d_max,
        tries: START_RETRIES,
    })
}

/// `count` episodes on one map with uniformly drawn categories, ids
/// `<prefix>-<index>`.
pub fn generate_episodes(
    grid: &OccupancyGrid,
    map_id: &str,
    prefix: &str,
    count: usize,
    seed: u64,
    d_min: f64,
    d_max: f64,
) -> Result<Vec<Episode>, EpisodeError> {
    let cats: Vec<GoalCategory> = GoalCategory::ALL
        .into_iter()
        .filter(|&c| !grid.goals(c).is_empty())
        .collect();
    if cats.is_empty() {
        return Err(EpisodeError::NoGoalInstance(GoalCategory::Chair));
    }
    let mut r = rng::seeded(rng::derive(seed, 0xE915));
    (0..count)
        .map(|i| {
            let cat = cats[r.gen_range(0..cats.len())];
            let id = format!("{prefix}-{i:04}");
            generate_episode(grid, map_id, &id, cat, rng::derive(seed, i as u64), d_min, d_max)
        })
        .collect()
}
