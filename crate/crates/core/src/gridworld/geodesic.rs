//! Shortest paths on the 8-connected free-cell graph.
//!
//! Path lengths are kept as exact `(orthogonal, diagonal)` edge counts so that
//! equal-length paths compare equal regardless of summation order; metres are
//! derived from the counts in one place.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::grid::{Cell, OccupancyGrid, CELL_SIZE_M};
use crate::math::SQRT_2;

/// Exact path length `orth + diag * sqrt(2)` in cell units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PathCost {
    pub orth: u32,
    pub diag: u32,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost { orth: 0, diag: 0 };

    pub fn meters(self) -> f64 {
        CELL_SIZE_M * (self.orth as f64 + self.diag as f64 * SQRT_2)
    }

    fn plus(self, diagonal: bool) -> Self {
        if diagonal {
            PathCost { orth: self.orth, diag: self.diag + 1 }
        } else {
            PathCost { orth: self.orth + 1, diag: self.diag }
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare a1 + b1*r with a2 + b2*r, r = sqrt(2): sign of da + db*r
        let da = self.orth as i64 - other.orth as i64;
        let db = self.diag as i64 - other.diag as i64;
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            // opposite signs: compare da^2 with 2 db^2
            (a, _) => {
                let lhs = da * da;
                let rhs = 2 * db * db;
                let mag = lhs.cmp(&rhs);
                if a > 0 {
                    mag
                } else {
                    mag.reverse()
                }
            }
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeodesicError {
    #[error("source cell ({x}, {y}) is occupied")]
    SourceOccupied { x: i32, y: i32 },
}

/// Neighbour offsets; diagonals last.
pub(crate) const NEIGHBOURS: [(i32, i32); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

/// True when moving from `c` by `(dx, dy)` is an edge of the free-cell graph.
/// Diagonal moves need both adjacent orthogonal cells free.
pub(crate) fn edge_allowed(grid: &OccupancyGrid, c: Cell, dx: i32, dy: i32) -> bool {
    let n = c.offset(dx, dy);
    if grid.is_occupied(n) {
        return false;
    }
    if dx != 0 && dy != 0 {
        grid.is_free(c.offset(dx, 0)) && grid.is_free(c.offset(0, dy))
    } else {
        true
    }
}

/// Shortest-path cost from the nearest source to every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    width: usize,
    cost: Vec<Option<PathCost>>,
}

impl DistanceField {
    pub fn cost(&self, c: Cell) -> Option<PathCost> {
        if c.x < 0 || c.y < 0 || c.x as usize >= self.width {
            return None;
        }
        self.cost
            .get(c.y as usize * self.width + c.x as usize)
            .copied()
            .flatten()
    }

    /// Metres to the nearest source, `INFINITY` when unreachable.
    pub fn meters(&self, c: Cell) -> f64 {
        self.cost(c).map_or(f64::INFINITY, PathCost::meters)
    }

    pub fn is_reachable(&self, c: Cell) -> bool {
        self.cost(c).is_some()
    }
}

/// Multi-source Dijkstra. Occupied sources are ignored.
pub fn distance_field(grid: &OccupancyGrid, sources: &[Cell]) -> DistanceField {
    let mut cost: Vec<Option<PathCost>> = vec![None; grid.width() * grid.height()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        if grid.is_free(s) {
            let i = grid.index(s);
            if cost[i].is_none() {
                cost[i] = Some(PathCost::ZERO);
                heap.push(Reverse((PathCost::ZERO, i)));
            }
        }
    }
    while let Some(Reverse((d, i))) = heap.pop() {
        if cost[i] != Some(d) {
            continue;
        }
        let c = grid.cell_at(i);
        for (k, &(dx, dy)) in NEIGHBOURS.iter().enumerate() {
            if !edge_allowed(grid, c, dx, dy) {
                continue;
            }
            let ni = grid.index(c.offset(dx, dy));
            let nd = d.plus(k >= 4);
            if cost[ni].map_or(true, |old| nd < old) {
                cost[ni] = Some(nd);
                heap.push(Reverse((nd, ni)));
            }
        }
    }
    DistanceField {
        width: grid.width(),
        cost,
    }
}

/// Geodesic distance in metres from `from` to the nearest of `to_cells`;
/// `INFINITY` when none is reachable.
pub fn geodesic_distance(
    grid: &OccupancyGrid,
    from: Cell,
    to_cells: &[Cell],
) -> Result<f64, GeodesicError> {
    if grid.is_occupied(from) {
        return Err(GeodesicError::SourceOccupied { x: from.x, y: from.y });
    }
    let field = distance_field(grid, &[from]);
    Ok(to_cells
        .iter()
        .filter_map(|&c| field.cost(c))
        .min()
        .map_or(f64::INFINITY, PathCost::meters))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_ordering_is_exact() {
        let a = PathCost { orth: 3, diag: 0 };
        let b = PathCost { orth: 0, diag: 2 }; // 2.83
        let c = PathCost { orth: 1, diag: 1 }; // 2.41
        assert!(b < a);
        assert!(c < b);
        assert!(PathCost { orth: 7, diag: 0 } > PathCost { orth: 0, diag: 4 }); // 7 vs 5.66
        assert!(PathCost { orth: 5, diag: 0 } < PathCost { orth: 0, diag: 4 });
        assert_eq!(a.cmp(&a), Ordering::Equal);
    }

    #[test]
    fn corridor_distances() {
        let g = OccupancyGrid::from_rows(&["#######", "#.....#", "#######"], Default::default())
            .unwrap();
        let d = geodesic_distance(&g, Cell::new(1, 1), &[Cell::new(5, 1)]).unwrap();
        assert_eq!(d, 1.0);
        assert_eq!(geodesic_distance(&g, Cell::new(3, 1), &[Cell::new(3, 1)]).unwrap(), 0.0);
        assert!(geodesic_distance(&g, Cell::new(0, 0), &[Cell::new(1, 1)]).is_err());
    }

    #[test]
    fn no_corner_cutting() {
        let g = OccupancyGrid::from_rows(&["####", "#.##", "##.#", "####"], Default::default())
            .unwrap();
        let d = geodesic_distance(&g, Cell::new(1, 1), &[Cell::new(2, 2)]).unwrap();
        assert_eq!(d, f64::INFINITY);
        let g = OccupancyGrid::from_rows(&["####", "#..#", "#..#", "####"], Default::default())
            .unwrap();
        let d = geodesic_distance(&g, Cell::new(1, 1), &[Cell::new(2, 2)]).unwrap();
        assert_eq!(d, 0.25 * SQRT_2);
    }
}
