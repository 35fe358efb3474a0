//! Deterministic 2D navigation world: six-action agent on an occupancy grid.

mod action;
pub mod episode;
pub mod geodesic;
mod grid;
pub mod mapgen;
mod motion;
mod observe;

pub use action::{Action, ActionDistribution, ActionSet, DistributionError, GoalCategory};
pub use episode::{generate_episode, generate_episodes, Episode, EpisodeError, EpisodeGeometry, SUCCESS_RADIUS_M};
pub use geodesic::{distance_field, geodesic_distance, DistanceField, GeodesicError, PathCost};
pub use grid::{Cell, GridError, OccupancyGrid, CELL_SIZE_M};
pub use mapgen::{generate_map, MapGenConfig, MapGenError};
pub use motion::{
    colliding_actions, forward_collides, heading_vector, segment_cells, step, Pose, StepOutcome,
    STEP_LENGTH_M, TURN_DEG,
};
pub use observe::{
    line_of_sight, observe, Observation, Sighting, DEPTH_ANGLES_DEG, DEPTH_MAX_M, PATCH_RADIUS,
    PATCH_SIDE,
};
