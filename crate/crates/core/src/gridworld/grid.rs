use alloc::string::String;
use alloc::vec::Vec;

use super::action::GoalCategory;
use crate::math;

/// Edge length of a grid cell; equal to one forward step.
pub const CELL_SIZE_M: f64 = 0.25;

/// Integer cell coordinate. `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    /// Cell containing the metric point `(x_m, y_m)`.
    pub fn containing(x_m: f64, y_m: f64) -> Self {
        Self {
            x: math::floor(x_m / CELL_SIZE_M) as i32,
            y: math::floor(y_m / CELL_SIZE_M) as i32,
        }
    }

    pub fn center(self) -> (f64, f64) {
        (
            (self.x as f64 + 0.5) * CELL_SIZE_M,
            (self.y as f64 + 0.5) * CELL_SIZE_M,
        )
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid must be at least 3x3, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("occupancy has {found} cells, expected {expected}")]
    CellCount { expected: usize, found: usize },
    #[error("border cell ({x}, {y}) is free")]
    OpenBorder { x: i32, y: i32 },
    #[error("{category} goal at ({x}, {y}) is not a free cell")]
    GoalNotFree { category: GoalCategory, x: i32, y: i32 },
    #[error("row {row} has width {found}, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("unexpected character {ch:?} in row {row}")]
    BadChar { row: usize, ch: char },
}

/// Immutable wall-bounded occupancy map with goal instances per category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    occupied: Vec<bool>,
    goals: [Vec<Cell>; 6],
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        occupied: Vec<bool>,
        goals: [Vec<Cell>; 6],
    ) -> Result<Self, GridError> {
        if width < 3 || height < 3 {
            return Err(GridError::TooSmall { width, height });
        }
        if occupied.len() != width * height {
            return Err(GridError::CellCount {
                expected: width * height,
                found: occupied.len(),
            });
        }
        let grid = Self {
            width,
            height,
            occupied,
            goals,
        };
        for x in 0..width as i32 {
            for y in [0, height as i32 - 1] {
                if !grid.is_occupied(Cell::new(x, y)) {
                    return Err(GridError::OpenBorder { x, y });
                }
            }
        }
        for y in 0..height as i32 {
            for x in [0, width as i32 - 1] {
                if !grid.is_occupied(Cell::new(x, y)) {
                    return Err(GridError::OpenBorder { x, y });
                }
            }
        }
        for cat in GoalCategory::ALL {
            for &c in grid.goals(cat) {
                if grid.is_occupied(c) {
                    return Err(GridError::GoalNotFree {
                        category: cat,
                        x: c.x,
                        y: c.y,
                    });
                }
            }
        }
        Ok(grid)
    }

    /// Parses rows of `#` (occupied) and `.` (free).
    pub fn from_rows<S: AsRef<str>>(rows: &[S], goals: [Vec<Cell>; 6]) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut occupied = Vec::with_capacity(width * height);
        for (row, line) in rows.iter().enumerate() {
            let line = line.as_ref();
            let n = line.chars().count();
            if n != width {
                return Err(GridError::RaggedRow {
                    row,
                    expected: width,
                    found: n,
                });
            }
            for ch in line.chars() {
                match ch {
                    '#' => occupied.push(true),
                    '.' => occupied.push(false),
                    _ => return Err(GridError::BadChar { row, ch }),
                }
            }
        }
        Self::new(width, height, occupied, goals)
    }

    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| if self.occupied[y * self.width + x] { '#' } else { '.' })
                    .collect()
            })
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as usize) < self.width && (c.y as usize) < self.height
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.y as usize * self.width + c.x as usize
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    /// Out-of-bounds cells count as occupied.
    #[inline]
    pub fn is_occupied(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.occupied[self.index(c)]
    }

    #[inline]
    pub fn is_free(&self, c: Cell) -> bool {
        !self.is_occupied(c)
    }

    pub fn goals(&self, category: GoalCategory) -> &[Cell] {
        &self.goals[category.index()]
    }

    pub fn all_goals(&self) -> &[Vec<Cell>; 6] {
        &self.goals
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.occupied.len())
            .filter(|&i| !self.occupied[i])
            .map(|i| self.cell_at(i))
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }
}
