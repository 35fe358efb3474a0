//! Map files: `{"cell_size_m": 0.25, "rows": ["###", "#.#", ...], "goals": {"chair": [[x, y], ...]}}`
//! with `#` occupied and `.` free.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use navfuse_core::gridworld::{Cell, GoalCategory, OccupancyGrid, CELL_SIZE_M};
use serde::{Deserialize, Serialize};

use super::lines::parse_json;
use super::{create, FormatError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub cell_size_m: f64,
    pub rows: Vec<String>,
    /// Goal instances per category label, as `[x_cell, y_cell]`.
    pub goals: BTreeMap<String, Vec<[i32; 2]>>,
}

impl MapFile {
    pub fn from_grid(grid: &OccupancyGrid) -> Self {
        let goals = GoalCategory::ALL
            .iter()
            .filter(|c| !grid.goals(**c).is_empty())
            .map(|c| (c.label().to_string(), grid.goals(*c).iter().map(|g| [g.x, g.y]).collect()))
            .collect();
        Self {
            cell_size_m: CELL_SIZE_M,
            rows: grid.to_rows(),
            goals,
        }
    }

    /// Builds the grid; errors are `(field, message)`.
    pub fn to_grid(&self) -> Result<OccupancyGrid, (String, String)> {
        if self.cell_size_m != CELL_SIZE_M {
            return Err(("cell_size_m".into(), format!("only {CELL_SIZE_M} m cells are supported")));
        }
        let mut goals: [Vec<Cell>; 6] = Default::default();
        for (label, cells) in &self.goals {
            let cat = GoalCategory::from_label(label)
                .ok_or_else(|| (format!("goals.{label}"), "unknown goal category".to_string()))?;
            goals[cat.index()] = cells.iter().map(|&[x, y]| Cell::new(x, y)).collect();
        }
        OccupancyGrid::from_rows(&self.rows, goals).map_err(|e| ("rows".into(), e.to_string()))
    }
}

pub fn read_map(path: &Path) -> Result<OccupancyGrid, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let file: MapFile = parse_json(&text, &path.display().to_string(), 1)?;
    file.to_grid().map_err(|(field, message)| FormatError::Field {
        path: path.display().to_string(),
        line: 1,
        field,
        message,
    })
}

pub fn write_map(path: &Path, grid: &OccupancyGrid) -> Result<(), FormatError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &MapFile::from_grid(grid))
        .map_err(|e| FormatError::io(path, e.into()))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| FormatError::io(path, e))
}

/// `*.json` files in `dir`, sorted by name.
pub fn list_maps(dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))? {
        let p = entry.map_err(|e| FormatError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "json") {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(FormatError::content(dir, "no *.json map files"));
    }
    Ok(out)
}
