//! Episode files: JSON Lines, one [`Episode`] per line.

use std::io::Write;
use std::path::Path;

use navfuse_core::gridworld::Episode;

use super::lines::Lines;
use super::{create, open, FormatError};

pub fn write_episodes(path: &Path, episodes: &[Episode]) -> Result<(), FormatError> {
    let mut out = create(path)?;
    let io = |e| FormatError::io(path, e);
    for ep in episodes {
        serde_json::to_writer(&mut out, ep).map_err(|e| FormatError::io(path, e.into()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_episodes(path: &Path) -> Result<Vec<Episode>, FormatError> {
    let mut lines = Lines::new(open(path)?, path.display().to_string());
    let mut out = Vec::new();
    while lines.advance()? {
        let ep: Episode = lines.parse()?;
        if !(ep.d_init_m > 0.0) {
            return Err(lines.field_error("d_init_m", "must be positive"));
        }
        out.push(ep);
    }
    Ok(out)
}
