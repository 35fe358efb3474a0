use super::action::{Action, ActionSet};
use super::grid::{Cell, OccupancyGrid, CELL_SIZE_M};

/// Forward step length, equal to the cell size.
pub const STEP_LENGTH_M: f64 = 0.25;
/// Rotation per turn or look action.
pub const TURN_DEG: i32 = 30;
const PITCH_LIMIT_DEG: i32 = 30;

// Nearest double to sqrt(3)/2.
const S3_2: f64 = 0.866_025_403_784_438_6;

// Exact unit vectors for the twelve headings; cos/sin of multiples of 30
// degrees through libm leave 1e-17 residue on the axes.
const HEADING_VECTORS: [(f64, f64); 12] = [
    (1.0, 0.0),
    (S3_2, 0.5),
    (0.5, S3_2),
    (0.0, 1.0),
    (-0.5, S3_2),
    (-S3_2, 0.5),
    (-1.0, 0.0),
    (-S3_2, -0.5),
    (-0.5, -S3_2),
    (0.0, -1.0),
    (0.5, -S3_2),
    (S3_2, -0.5),
];

/// Unit vector for a heading that is a multiple of 30 degrees.
pub fn heading_vector(heading_deg: i32) -> (f64, f64) {
    HEADING_VECTORS[(heading_deg.rem_euclid(360) / TURN_DEG) as usize % 12]
}

/// Agent pose. Headings increase counter-clockwise (`TurnLeft` adds 30).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: i32,
    pub pitch_deg: i32,
}

impl Pose {
    pub fn new(x_m: f64, y_m: f64, heading_deg: i32) -> Self {
        Self {
            x_m,
            y_m,
            heading_deg,
            pitch_deg: 0,
        }
    }

    /// Pose at the centre of `cell`.
    pub fn at_cell(cell: Cell, heading_deg: i32) -> Self {
        let (x, y) = cell.center();
        Self::new(x, y, heading_deg)
    }

    pub fn cell(&self) -> Cell {
        Cell::containing(self.x_m, self.y_m)
    }

    pub fn heading_rad(&self) -> f64 {
        self.heading_deg as f64 * crate::math::PI / 180.0
    }

    pub fn is_valid_on(&self, grid: &OccupancyGrid) -> bool {
        self.heading_deg.rem_euclid(TURN_DEG) == 0
            && (0..360).contains(&self.heading_deg)
            && matches!(self.pitch_deg, -30 | 0 | 30)
            && self.x_m.is_finite()
            && self.y_m.is_finite()
            && grid.is_free(self.cell())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
    pub stopped: bool,
}

/// Visits, in order, every cell containing some point of the segment
/// `(x0, y0)-(x1, y1)`. The callback gets the cell and the segment parameter
/// at which it is entered, and returns `false` to stop early. Returns `true`
/// when the whole segment was visited.
pub fn segment_cells(
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    mut visit: impl FnMut(Cell, f64) -> bool,
) -> bool {
    let dx = x1 - x0;
    let dy = y1 - y0;
    let mut xs = AxisCrossings::new(x0, dx);
    let mut ys = AxisCrossings::new(y0, dy);
    let at = |t: f64| Cell::containing(x0 + t * dx, y0 + t * dy);

    let mut last = at(0.0);
    if !visit(last, 0.0) {
        return false;
    }
    let mut t_prev = 0.0;
    loop {
        let tx = xs.peek();
        let ty = ys.peek();
        let t_next = tx.min(ty).min(1.0);
        for (t, entry) in [(0.5 * (t_prev + t_next), t_prev), (t_next, t_next)] {
            let c = at(t);
            if c != last {
                last = c;
                if !visit(c, entry) {
                    return false;
                }
            }
        }
        if t_next >= 1.0 {
            return true;
        }
        if tx <= t_next {
            xs.advance();
        }
        if ty <= t_next {
            ys.advance();
        }
        t_prev = t_next;
    }
}

/// Parameters at which a moving coordinate crosses grid lines, in order.
struct AxisCrossings {
    origin: f64,
    delta: f64,
    next_line: i64,
    step: i64,
}

impl AxisCrossings {
    fn new(origin: f64, delta: f64) -> Self {
        let k = origin / CELL_SIZE_M;
        let (next_line, step) = if delta > 0.0 {
            (crate::math::floor(k) as i64 + 1, 1)
        } else {
            (libm::ceil(k) as i64 - 1, -1)
        };
        Self {
            origin,
            delta,
            next_line,
            step,
        }
    }

    fn peek(&self) -> f64 {
        if self.delta == 0.0 {
            return f64::INFINITY;
        }
        (self.next_line as f64 * CELL_SIZE_M - self.origin) / self.delta
    }

    fn advance(&mut self) {
        self.next_line += self.step;
    }
}

/// True when a forward step from `pose` would cross an occupied or
/// out-of-bounds cell. Every cell the step passes through is checked.
pub fn forward_collides(grid: &OccupancyGrid, pose: &Pose) -> bool {
    let (ux, uy) = heading_vector(pose.heading_deg);
    let (x1, y1) = (pose.x_m + STEP_LENGTH_M * ux, pose.y_m + STEP_LENGTH_M * uy);
    !segment_cells(pose.x_m, pose.y_m, x1, y1, |c, _| grid.is_free(c))
}

/// Applies one action. A blocked forward step leaves the pose unchanged.
pub fn step(grid: &OccupancyGrid, pose: &Pose, action: Action) -> StepOutcome {
    let mut next = *pose;
    let mut collided = false;
    match action {
        Action::Stop => {
            return StepOutcome {
                pose: *pose,
                collided: false,
                stopped: true,
            }
        }
        Action::TurnLeft => next.heading_deg = (pose.heading_deg + TURN_DEG).rem_euclid(360),
        Action::TurnRight => next.heading_deg = (pose.heading_deg - TURN_DEG).rem_euclid(360),
        Action::LookUp => next.pitch_deg = (pose.pitch_deg + TURN_DEG).min(PITCH_LIMIT_DEG),
        Action::LookDown => next.pitch_deg = (pose.pitch_deg - TURN_DEG).max(-PITCH_LIMIT_DEG),
        Action::MoveForward => {
            if forward_collides(grid, pose) {
                collided = true;
            } else {
                let (ux, uy) = heading_vector(pose.heading_deg);
                next.x_m = pose.x_m + STEP_LENGTH_M * ux;
                next.y_m = pose.y_m + STEP_LENGTH_M * uy;
            }
        }
    }
    StepOutcome {
        pose: next,
        collided,
        stopped: false,
    }
}

/// Actions whose execution from `pose` would collide.
pub fn colliding_actions(grid: &OccupancyGrid, pose: &Pose) -> ActionSet {
    let mut set = ActionSet::EMPTY;
    for a in Action::ALL {
        if step(grid, pose, a).collided {
            set.insert(a);
        }
    }
    set
}
