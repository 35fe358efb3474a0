use super::action::{Action, GoalCategory};
use super::episode::Episode;
use super::grid::{Cell, OccupancyGrid, CELL_SIZE_M};
use super::motion::{heading_vector, segment_cells, Pose};
use crate::math::{self, PI};

/// Half-width of the occupancy patch.
pub const PATCH_RADIUS: i32 = 5;
/// Side length of the occupancy patch.
pub const PATCH_SIDE: usize = 11;
/// Relative bearings of the depth rays, in degrees (positive = left).
pub const DEPTH_ANGLES_DEG: [i32; 5] = [-60, -30, 0, 30, 60];
/// Depth rays saturate at this range.
pub const DEPTH_MAX_M: f64 = 2.0;

/// Egocentric detection of the nearest visible goal instance.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sighting {
    /// Euclidean distance to the instance's cell centre.
    pub distance_m: f64,
    /// Length of the 8-connected grid line from the agent's cell to the
    /// instance (octile distance).
    pub grid_distance_m: f64,
    /// Bearing relative to the agent heading in `[-pi, pi)`, positive to the left.
    pub bearing_rad: f64,
}

/// What the agent perceives before choosing an action.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// World-aligned occupancy around the agent's cell, row-major from the
    /// top-left (`dy = -5, dx = -5`). 1 = occupied or out of bounds.
    pub patch: [u8; 121],
    /// Displacement from the episode start, metres.
    pub gps: [f64; 2],
    /// Heading relative to the start heading, radians in `[-pi, pi)`.
    pub compass: f64,
    pub prev_action: Option<Action>,
    pub goal: GoalCategory,
    pub collided_last: bool,
    /// Nearest goal instance in unobstructed line of sight, if any.
    pub sighting: Option<Sighting>,
    /// Free range along each of [`DEPTH_ANGLES_DEG`], capped at [`DEPTH_MAX_M`].
    pub depth: [f64; 5],
}

/// True when every cell on the straight line from the point to the centre of
/// `target` is free.
pub fn line_of_sight(grid: &OccupancyGrid, x_m: f64, y_m: f64, target: Cell) -> bool {
    let (tx, ty) = target.center();
    segment_cells(x_m, y_m, tx, ty, |c, _| grid.is_free(c))
}

fn depth_ray(grid: &OccupancyGrid, pose: &Pose, rel_deg: i32) -> f64 {
    let (ux, uy) = heading_vector(pose.heading_deg + rel_deg);
    let mut hit = DEPTH_MAX_M;
    segment_cells(
        pose.x_m,
        pose.y_m,
        pose.x_m + DEPTH_MAX_M * ux,
        pose.y_m + DEPTH_MAX_M * uy,
        |c, t| {
            if grid.is_occupied(c) {
                hit = t * DEPTH_MAX_M;
                false
            } else {
                true
            }
        },
    );
    hit
}

fn octile_m(a: Cell, b: Cell) -> f64 {
    let (dx, dy) = ((a.x - b.x).unsigned_abs(), (a.y - b.y).unsigned_abs());
    let (lo, hi) = (dx.min(dy), dx.max(dy));
    CELL_SIZE_M * ((hi - lo) as f64 + lo as f64 * math::SQRT_2)
}

/// Nearest visible instance by grid distance (Euclidean breaks ties).
fn sighting(grid: &OccupancyGrid, pose: &Pose, goal: GoalCategory) -> Option<Sighting> {
    let here = pose.cell();
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &g in grid.goals(goal) {
        let (gx, gy) = g.center();
        let (dx, dy) = (gx - pose.x_m, gy - pose.y_m);
        let d2 = dx * dx + dy * dy;
        let oct = octile_m(here, g);
        if best.is_some_and(|(bo, b2, _, _)| (bo, b2) <= (oct, d2)) {
            continue;
        }
        if line_of_sight(grid, pose.x_m, pose.y_m, g) {
            best = Some((oct, d2, dx, dy));
        }
    }
    best.map(|(oct, d2, dx, dy)| Sighting {
        distance_m: math::sqrt(d2),
        grid_distance_m: oct,
        bearing_rad: math::wrap_angle(math::atan2(dy, dx) - pose.heading_rad()),
    })
}

/// Builds the observation for `pose` within `episode`.
pub fn observe(
    grid: &OccupancyGrid,
    pose: &Pose,
    episode: &Episode,
    prev_action: Option<Action>,
    collided_last: bool,
) -> Observation {
    let center = pose.cell();
    let mut patch = [0u8; 121];
    for dy in -PATCH_RADIUS..=PATCH_RADIUS {
        for dx in -PATCH_RADIUS..=PATCH_RADIUS {
            let i = ((dy + PATCH_RADIUS) as usize) * PATCH_SIDE + (dx + PATCH_RADIUS) as usize;
            patch[i] = grid.is_occupied(center.offset(dx, dy)) as u8;
        }
    }
    let start = &episode.start;
    let compass = math::wrap_angle(
        (pose.heading_deg - start.heading_deg) as f64 * PI / 180.0,
    );
    let mut depth = [0.0; 5];
    for (d, &a) in depth.iter_mut().zip(&DEPTH_ANGLES_DEG) {
        *d = depth_ray(grid, pose, a);
    }
    Observation {
        patch,
        gps: [pose.x_m - start.x_m, pose.y_m - start.y_m],
        compass,
        prev_action,
        goal: episode.goal,
        collided_last,
        sighting: sighting(grid, pose, episode.goal),
        depth,
    }
}
