//! Shortest-path expert and synthetic demonstration corpus.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Reverse;

use rand::Rng as _;

use crate::gridworld::episode::generate_episodes;
use crate::gridworld::geodesic::{edge_allowed, NEIGHBOURS};
use crate::gridworld::{
    forward_collides, line_of_sight, observe, step, Action, Cell, DistanceField, Episode, EpisodeError,
    EpisodeGeometry, GoalCategory, Observation, OccupancyGrid, PathCost, Pose, CELL_SIZE_M, STEP_LENGTH_M,
    SUCCESS_RADIUS_M, TURN_DEG,
};
use crate::{math, rng};

/// How far along the shortest path the expert looks for a visible waypoint.
pub const LOOKAHEAD_CELLS: usize = 12;
/// Within this distance of the success region the expert plans its forward
/// moves exactly instead of following waypoints.
pub const PLAN_RADIUS_M: f64 = 3.0;
const PLAN_MAX_NODES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExpertError {
    #[error("goal unreachable from cell ({x}, {y})")]
    Unreachable { x: i32, y: i32 },
    #[error("no collision-free heading from cell ({x}, {y})")]
    Boxed { x: i32, y: i32 },
    #[error("noise_eps {0} outside [0, 1]")]
    Noise(f64),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExpertConfig {
    /// Probability of replacing the expert action by a random non-Stop action.
    pub noise_eps: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            noise_eps: 0.15,
            max_steps: 500,
            seed: 0,
        }
    }
}

/// One recorded step: the observation before acting, the action, and
/// whether it collided.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoStep {
    pub obs: Observation,
    pub action: Action,
    pub collided: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemonstrationRecord {
    pub episode: Episode,
    pub steps: Vec<DemoStep>,
    pub success: bool,
}

fn turn_toward(heading: i32, target: i32) -> Action {
    let diff = (target - heading).rem_euclid(360);
    if diff == 0 {
        Action::MoveForward
    } else if diff <= 180 {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// Bearing from the pose to `(cx, cy)`, rounded to the 30 degree grid.
/// Exact midpoints round counter-clockwise.
fn quantized_bearing(pose: &Pose, (cx, cy): (f64, f64)) -> i32 {
    let deg = math::atan2(cy - pose.y_m, cx - pose.x_m) * 180.0 / math::PI;
    let k = math::floor(deg / TURN_DEG as f64 + 0.5) as i32;
    (k * TURN_DEG).rem_euclid(360)
}

/// Cells of a shortest path starting after `from`, at most
/// [`LOOKAHEAD_CELLS`] long, ending at the first cell with zero cost.
fn shortest_path_ahead(grid: &OccupancyGrid, from: Cell, field: &DistanceField) -> Vec<Cell> {
    let mut path = Vec::new();
    let mut cur = from;
    while path.len() < LOOKAHEAD_CELLS {
        let Some(here) = field.cost(cur) else { break };
        if here == PathCost::ZERO {
            break;
        }
        // the neighbour whose cost plus the connecting edge equals ours
        let mut next: Option<Cell> = None;
        for (k, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
            if !edge_allowed(grid, cur, dx, dy) {
                continue;
            }
            let n = cur.offset(dx, dy);
            if let Some(c) = field.cost(n) {
                let through = if k >= 4 {
                    PathCost { orth: c.orth, diag: c.diag + 1 }
                } else {
                    PathCost { orth: c.orth + 1, diag: c.diag }
                };
                if through == here {
                    next = Some(n);
                    break;
                }
            }
        }
        match next {
            Some(n) => {
                path.push(n);
                cur = n;
            }
            None => break,
        }
    }
    path
}

// Heading unit vectors as (halves, multiples of sqrt(3)/2) per axis, so
// positions reached by forward steps have exact integer keys.
const LATTICE: [[i32; 4]; 12] = [
    [2, 0, 0, 0],
    [0, 1, 1, 0],
    [1, 0, 0, 1],
    [0, 0, 2, 0],
    [-1, 0, 0, 1],
    [0, -1, 1, 0],
    [-2, 0, 0, 0],
    [0, -1, -1, 0],
    [-1, 0, 0, -1],
    [0, 0, -2, 0],
    [1, 0, 0, -1],
    [0, 1, -1, 0],
];

const HALF_S3: f64 = 0.866_025_403_784_438_6;

fn lattice_point(pose: &Pose, k: &[i32; 4]) -> (f64, f64) {
    (
        pose.x_m + STEP_LENGTH_M * (0.5 * k[0] as f64 + HALF_S3 * k[1] as f64),
        pose.y_m + STEP_LENGTH_M * (0.5 * k[2] as f64 + HALF_S3 * k[3] as f64),
    )
}

/// Lower bound on the forward moves needed to reach any of `cells` from
/// `(x, y)`: straight-line distance to the nearest cell square.
fn moves_lower_bound(x: f64, y: f64, cells: &[Cell]) -> u32 {
    let mut best = f64::INFINITY;
    for c in cells {
        let (x0, y0) = (c.x as f64 * CELL_SIZE_M, c.y as f64 * CELL_SIZE_M);
        let dx = (x0 - x).max(0.0).max(x - x0 - CELL_SIZE_M);
        let dy = (y0 - y).max(0.0).max(y - y0 - CELL_SIZE_M);
        best = best.min(dx * dx + dy * dy);
    }
    let d = math::sqrt(best);
    libm::ceil(d / STEP_LENGTH_M - 1e-9).max(0.0) as u32
}

/// Orders initial headings by turn size, left before right on equal size.
fn turn_rank(from: i32, to: i32) -> i32 {
    let d = (to - from).rem_euclid(360);
    2 * d.min(360 - d) + i32::from(d > 180)
}

/// Heading of the first move of a plan that reaches the success region with
/// the fewest forward moves (A* over forward-step positions; turns are free
/// in path length). Ties prefer the smaller initial turn, then left.
/// `None` when the search gives up.
fn plan_first_heading(grid: &OccupancyGrid, pose: &Pose, geometry: &EpisodeGeometry) -> Option<i32> {
    let region = geometry.region_cells();
    // entries are (f, first turn, deeper first, key, first heading)
    let mut open = BinaryHeap::new();
    let mut best_g: BTreeMap<[i32; 4], u32> = BTreeMap::new();
    let origin = [0i32; 4];
    best_g.insert(origin, 0);
    open.push(Reverse((0, 0, Reverse(0), origin, None)));
    let mut expanded = 0;
    while let Some(Reverse((_, _, Reverse(g), key, first))) = open.pop() {
        if best_g.get(&key).is_some_and(|&b| b < g) {
            continue;
        }
        let (x, y) = lattice_point(pose, &key);
        if first.is_some() && geometry.in_success_region(Cell::containing(x, y)) {
            return first;
        }
        expanded += 1;
        if expanded > PLAN_MAX_NODES {
            return None;
        }
        for (h, v) in LATTICE.iter().enumerate() {
            let heading = h as i32 * TURN_DEG;
            if forward_collides(grid, &Pose::new(x, y, heading)) {
                continue;
            }
            let next = [key[0] + v[0], key[1] + v[1], key[2] + v[2], key[3] + v[3]];
            if best_g.get(&next).is_some_and(|&b| b <= g + 1) {
                continue;
            }
            best_g.insert(next, g + 1);
            let first = first.unwrap_or(heading);
            let (nx, ny) = lattice_point(pose, &next);
            let f = g + 1 + moves_lower_bound(nx, ny, region);
            open.push(Reverse((f, turn_rank(pose.heading_deg, first), Reverse(g + 1), next, Some(first))));
        }
    }
    None
}

/// Expert action for an episode's geometry. Stops inside the success
/// radius; otherwise heads along a shortest path into the success region.
pub fn expert_action_with_geometry(
    grid: &OccupancyGrid,
    pose: &Pose,
    geometry: &EpisodeGeometry,
) -> Result<Action, ExpertError> {
    let cell = pose.cell();
    let Some(here) = geometry.goal.cost(cell) else {
        return Err(ExpertError::Unreachable { x: cell.x, y: cell.y });
    };
    if here.meters() <= SUCCESS_RADIUS_M {
        return Ok(Action::Stop);
    }
    let field = &geometry.region;
    if field.meters(cell) <= PLAN_RADIUS_M {
        if let Some(heading) = plan_first_heading(grid, pose, geometry) {
            return Ok(turn_toward(pose.heading_deg, heading));
        }
    }
    // neighbours ordered by path length through them: the first is the next
    // waypoint of a shortest path; later ones are the replanning fallbacks
    let mut candidates: Vec<(f64, usize, Cell)> = NEIGHBOURS
        .iter()
        .enumerate()
        .filter(|(_, &(dx, dy))| edge_allowed(grid, cell, dx, dy))
        .filter_map(|(k, &(dx, dy))| {
            let n = cell.offset(dx, dy);
            let edge = if k >= 4 { math::SQRT_2 } else { 1.0 } * 0.25;
            field.cost(n).map(|c| (c.meters() + edge, k, n))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // aim at the furthest cell of the shortest path that is in plain view,
    // falling back to nearer path cells and then to the other neighbours
    let mut waypoints: Vec<Cell> = shortest_path_ahead(grid, cell, field)
        .into_iter()
        .rev()
        .filter(|&c| line_of_sight(grid, pose.x_m, pose.y_m, c))
        .collect();
    waypoints.extend(candidates.iter().map(|&(_, _, n)| n));
    for waypoint in waypoints {
        let target = quantized_bearing(pose, waypoint.center());
        let probe = Pose {
            heading_deg: target,
            ..*pose
        };
        if forward_collides(grid, &probe) {
            continue;
        }
        return Ok(turn_toward(pose.heading_deg, target));
    }
    // every waypoint bearing is blocked: take the free heading whose landing
    // cell is closest to the goal
    let mut best: Option<(f64, i32, i32)> = None;
    for k in 0..12 {
        let heading = k * TURN_DEG;
        let probe = Pose {
            heading_deg: heading,
            ..*pose
        };
        if forward_collides(grid, &probe) {
            continue;
        }
        let landing = step(grid, &probe, Action::MoveForward).pose.cell();
        let d = field.meters(landing);
        let turn = (heading - pose.heading_deg).rem_euclid(360);
        let turn = turn.min(360 - turn);
        let key = (d, turn, heading);
        if best.map_or(true, |b| (key.0, key.1) < (b.0, b.1)) {
            best = Some(key);
        }
    }
    match best {
        Some((_, _, heading)) => Ok(turn_toward(pose.heading_deg, heading)),
        None => Err(ExpertError::Boxed { x: cell.x, y: cell.y }),
    }
}

/// Expert action toward the nearest instance of `goal`.
pub fn expert_action(
    grid: &OccupancyGrid,
    pose: &Pose,
    goal: GoalCategory,
) -> Result<Action, ExpertError> {
    expert_action_with_geometry(grid, pose, &EpisodeGeometry::new(grid, goal))
}

/// Rolls out the (optionally noisy) expert on one episode.
pub fn rollout_expert(
    grid: &OccupancyGrid,
    episode: &Episode,
    cfg: &ExpertConfig,
    seed: u64,
) -> Result<DemonstrationRecord, ExpertError> {
    if !(0.0..=1.0).contains(&cfg.noise_eps) {
        return Err(ExpertError::Noise(cfg.noise_eps));
    }
    let geometry = EpisodeGeometry::new(grid, episode.goal);
    let mut r = rng::seeded(seed);
    let mut pose = episode.start;
    let mut prev = None;
    let mut collided_last = false;
    let mut steps = Vec::new();
    while steps.len() < cfg.max_steps {
        let obs = observe(grid, &pose, episode, prev, collided_last);
        let mut action = expert_action_with_geometry(grid, &pose, &geometry)?;
        let noisy = r.gen::<f64>() < cfg.noise_eps;
        let pick = r.gen_range(1..Action::COUNT);
        if noisy {
            action = Action::ALL[pick];
        }
        let out = step(grid, &pose, action);
        steps.push(DemoStep {
            obs,
            action,
            collided: out.collided,
        });
        pose = out.pose;
        prev = Some(action);
        collided_last = out.collided;
        if out.stopped {
            break;
        }
    }
    let success = steps.last().is_some_and(|s| s.action == Action::Stop)
        && geometry.in_success_region(pose.cell());
    Ok(DemonstrationRecord {
        episode: episode.clone(),
        steps,
        success,
    })
}

/// Demonstrations plus the number of episodes whose rollout failed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemoCorpus {
    pub records: Vec<DemonstrationRecord>,
    pub skipped: usize,
}

/// Generates `episodes_per_map` episodes on every map and rolls out the
/// expert on each. Episode ids are `<map_id>-<index>`.
pub fn generate_demonstrations<'a, I>(
    maps: I,
    episodes_per_map: usize,
    cfg: &ExpertConfig,
    d_range: (f64, f64),
) -> Result<DemoCorpus, ExpertError>
where
    I: IntoIterator<Item = (&'a str, &'a OccupancyGrid)>,
{
    let mut corpus = DemoCorpus::default();
    for (m, (map_id, grid)) in maps.into_iter().enumerate() {
        let map_seed = rng::derive(cfg.seed, m as u64);
        let episodes = match generate_episodes(
            grid,
            map_id,
            map_id,
            episodes_per_map,
            map_seed,
            d_range.0,
            d_range.1,
        ) {
            Ok(e) => e,
            Err(_) => {
                corpus.skipped += episodes_per_map;
                continue;
            }
        };
        for (i, ep) in episodes.iter().enumerate() {
            match rollout_expert(grid, ep, cfg, rng::derive(map_seed, 0x5EED + i as u64)) {
                Ok(rec) => corpus.records.push(rec),
                Err(ExpertError::Noise(n)) => return Err(ExpertError::Noise(n)),
                Err(_) => corpus.skipped += 1,
            }
        }
    }
    Ok(corpus)
}
