//! Synthetic indoor layouts: walled rooms joined by doorways, scattered
//! furniture blocks, and goal instances on free cells.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::action::GoalCategory;
use super::grid::{Cell, GridError, OccupancyGrid};
use crate::rng::{self, Rng};

const MAX_ATTEMPTS: u64 = 20;
const FURNITURE_TRIES: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MapGenConfig {
    pub width: usize,
    pub height: usize,
    /// Target occupied fraction of the interior, walls included.
    pub obstacle_density: f64,
    /// Inclusive range of instances per goal category.
    pub goals_per_category: (usize, usize),
    /// Rooms wider or taller than this are split.
    pub max_room: usize,
    pub door_width: usize,
}

impl Default for MapGenConfig {
    fn default() -> Self {
        Self {
            width: 40,
            height: 40,
            obstacle_density: 0.15,
            goals_per_category: (1, 3),
            max_room: 14,
            door_width: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapGenError {
    #[error("map must be at least 10x10, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("obstacle density {0} outside [0, 0.35]")]
    Density(f64),
    #[error("goal count range {0:?} is invalid")]
    GoalRange((usize, usize)),
    #[error("could not lay out a usable map after {0} attempts")]
    PlacementFailed(u64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

struct Layout {
    w: usize,
    h: usize,
    occ: Vec<bool>,
    protected: Vec<bool>,
}

impl Layout {
    fn set(&mut self, x: usize, y: usize, v: bool) {
        self.occ[y * self.w + x] = v;
    }

    fn interior_occupied(&self) -> usize {
        (1..self.h - 1)
            .flat_map(|y| (1..self.w - 1).map(move |x| (x, y)))
            .filter(|&(x, y)| self.occ[y * self.w + x])
            .count()
    }

    /// Recursively splits the inclusive rectangle with walls and doorways.
    fn partition(&mut self, r: &mut Rng, x0: usize, y0: usize, x1: usize, y1: usize, cfg: &MapGenConfig) {
        let rw = x1 + 1 - x0;
        let rh = y1 + 1 - y0;
        let min_room = cfg.max_room / 2;
        let split_vertical = rw > cfg.max_room && (rw >= rh || rh <= cfg.max_room);
        let split_horizontal = !split_vertical && rh > cfg.max_room;
        if split_vertical {
            let x = r.gen_range(x0 + min_room..=x1 - min_room);
            for y in y0..=y1 {
                self.set(x, y, true);
            }
            let door = r.gen_range(y0..=y1 + 1 - cfg.door_width.min(rh));
            for y in door..door + cfg.door_width.min(rh) {
                self.set(x, y, false);
                self.protected[y * self.w + x] = true;
                self.protected[y * self.w + x - 1] = true;
                self.protected[y * self.w + x + 1] = true;
            }
            self.partition(r, x0, y0, x - 1, y1, cfg);
            self.partition(r, x + 1, y0, x1, y1, cfg);
        } else if split_horizontal {
            let y = r.gen_range(y0 + min_room..=y1 - min_room);
            for x in x0..=x1 {
                self.set(x, y, true);
            }
            let door = r.gen_range(x0..=x1 + 1 - cfg.door_width.min(rw));
            for x in door..door + cfg.door_width.min(rw) {
                self.set(x, y, false);
                self.protected[y * self.w + x] = true;
                self.protected[(y - 1) * self.w + x] = true;
                self.protected[(y + 1) * self.w + x] = true;
            }
            self.partition(r, x0, y0, x1, y - 1, cfg);
            self.partition(r, x0, y + 1, x1, y1, cfg);
        }
    }

    fn furnish(&mut self, r: &mut Rng, density: f64) {
        let interior = (self.w - 2) * (self.h - 2);
        let target = (density * interior as f64) as usize;
        let mut occupied = self.interior_occupied();
        let mut tries = 0;
        while occupied < target && tries < FURNITURE_TRIES {
            tries += 1;
            let bw = r.gen_range(1..=3usize);
            let bh = r.gen_range(1..=3usize);
            let x = r.gen_range(1..self.w - 1 - bw + 1);
            let y = r.gen_range(1..self.h - 1 - bh + 1);
            let clear = (y..y + bh)
                .all(|yy| (x..x + bw).all(|xx| !self.occ[yy * self.w + xx] && !self.protected[yy * self.w + xx]));
            if !clear {
                continue;
            }
            for yy in y..y + bh {
                for xx in x..x + bw {
                    self.set(xx, yy, true);
                }
            }
            occupied += bw * bh;
        }
    }

    /// Keeps the largest 4-connected free region and fills the rest.
    /// Returns the size of the kept region.
    fn keep_largest_region(&mut self) -> usize {
        let n = self.w * self.h;
        let mut label = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..n {
            if self.occ[s] || label[s] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            label[s] = id;
            queue.push_back(s);
            while let Some(i) = queue.pop_front() {
                size += 1;
                let (x, y) = (i % self.w, i / self.w);
                let mut push = |j: usize| {
                    if !self.occ[j] && label[j] == usize::MAX {
                        label[j] = id;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    push(i - 1);
                }
                if x + 1 < self.w {
                    push(i + 1);
                }
                if y > 0 {
                    push(i - self.w);
                }
                if y + 1 < self.h {
                    push(i + self.w);
                }
            }
            sizes.push(size);
        }
        let Some((keep, &size)) = sizes.iter().enumerate().max_by_key(|&(i, &s)| (s, usize::MAX - i))
        else {
            return 0;
        };
        for i in 0..n {
            if !self.occ[i] && label[i] != keep {
                self.occ[i] = true;
            }
        }
        size
    }
}

/// Generates a map; a pure function of `(config, seed)`.
pub fn generate_map(cfg: &MapGenConfig, seed: u64) -> Result<OccupancyGrid, MapGenError> {
    if cfg.width < 10 || cfg.height < 10 {
        return Err(MapGenError::TooSmall {
            width: cfg.width,
            height: cfg.height,
        });
    }
    if !(0.0..=0.35).contains(&cfg.obstacle_density) {
        return Err(MapGenError::Density(cfg.obstacle_density));
    }
    let (gmin, gmax) = cfg.goals_per_category;
    if gmin == 0 || gmin > gmax || cfg.max_room < 6 || cfg.door_width == 0 {
        return Err(MapGenError::GoalRange(cfg.goals_per_category));
    }
    let (w, h) = (cfg.width, cfg.height);
    let interior = (w - 2) * (h - 2);
    for attempt in 0..MAX_ATTEMPTS {
        let mut r = rng::seeded(rng::derive(seed, attempt));
        let mut occ = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    occ[y * w + x] = true;
                }
            }
        }
        let mut layout = Layout {
            w,
            h,
            occ,
            protected: vec![false; w * h],
        };
        if cfg.obstacle_density > 0.0 {
            layout.partition(&mut r, 1, 1, w - 2, h - 2, cfg);
            layout.furnish(&mut r, cfg.obstacle_density);
        }
        let region = layout.keep_largest_region();
        if region * 2 < interior {
            continue;
        }
        let mut free: Vec<Cell> = (0..w * h)
            .filter(|&i| !layout.occ[i])
            .map(|i| Cell::new((i % w) as i32, (i / w) as i32))
            .collect();
        if free.len() < GoalCategory::COUNT * gmax + 1 {
            continue;
        }
        let mut goals: [Vec<Cell>; 6] = Default::default();
        for g in &mut goals {
            let k = r.gen_range(gmin..=gmax);
            for _ in 0..k {
                let i = r.gen_range(0..free.len());
                g.push(free.swap_remove(i));
            }
            g.sort();
        }
        return Ok(OccupancyGrid::new(w, h, layout.occ, goals)?);
    }
    Err(MapGenError::PlacementFailed(MAX_ATTEMPTS))
}
