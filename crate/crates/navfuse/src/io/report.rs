//! Evaluation reports as pretty JSON and per-episode CSV.

use std::io::Write;
use std::path::Path;

use navfuse_core::eval::EvalReport;

use super::lines::parse_json;
use super::{create, FormatError};

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), FormatError> {
    let mut out = create(path)?;
    let io = |e| FormatError::io(path, e);
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| FormatError::io(path, e.into()))?;
    out.write_all(b"\n").map_err(io)?;
    out.flush().map_err(io)
}

pub fn read_report(path: &Path) -> Result<EvalReport, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_json(&text, &path.display().to_string(), 1)
}

/// One row per (episode, seed).
pub fn write_report_csv<W: Write>(report: &EvalReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode_id",
        "seed",
        "success",
        "softspl",
        "collision_count",
        "steps",
        "path_length_m",
        "d_t_m",
        "fallback_count",
        "error",
    ])?;
    for r in &report.per_episode {
        w.write_record([
            r.episode_id.clone(),
            r.seed.to_string(),
            u8::from(r.success).to_string(),
            r.softspl.to_string(),
            r.collision_count.to_string(),
            r.steps.to_string(),
            r.path_length_m.to_string(),
            r.d_t_m.to_string(),
            r.fallback_count.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
