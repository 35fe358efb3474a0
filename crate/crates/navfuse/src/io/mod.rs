//! On-disk formats: map JSON, episode/demonstration/target JSON Lines,
//! NVF1 parameter files and evaluation reports.

mod demos;
mod episodes;
mod lines;
mod maps;
mod params;
mod report;
mod targets;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

pub use demos::{read_demos, write_demos, DemoReader, DemoWriter};
pub use episodes::{read_episodes, write_episodes};
pub use maps::{list_maps, read_map, write_map, MapFile};
pub use params::{read_policy, read_student, write_policy, write_student};
pub use report::{read_report, write_report, write_report_csv};
pub use targets::{read_targets, write_targets, TargetReader, TargetWriter};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {cause}")]
    Io { path: String, cause: std::io::Error },
    /// A line failed to parse or validate; `field` is the JSON path of the
    /// offending value.
    #[error("{path}:{line}: field `{field}`: {message}")]
    Field {
        path: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Content { path: String, message: String },
}

impl FormatError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            cause: source,
        }
    }

    pub(crate) fn content(path: &Path, message: impl ToString) -> Self {
        Self::Content {
            path: path.display().to_string(),
            message: message.to_string(),
        }
    }

    /// Line number of the offending line, when the error has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Field { line, .. } | Self::Line { line, .. } => Some(*line),
            _ => None,
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FormatError::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FormatError::io(path, e))
}

/// Resolves a path stored inside `referrer`: relative paths are taken
/// relative to the referring file's directory when that file exists there,
/// otherwise relative to the working directory.
pub fn resolve_relative(referrer: &Path, stored: &str) -> PathBuf {
    let p = Path::new(stored);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    if let Some(dir) = referrer.parent() {
        let candidate = dir.join(p);
        if candidate.exists() {
            return candidate;
        }
    }
    p.to_path_buf()
}

/// The path to store in a file written at `file` so that
/// [`resolve_relative`] finds `target` again: relative with `/` separators
/// when `target` lies under the file's directory, absolute otherwise.
pub fn path_for_storage(file: &Path, target: &Path) -> String {
    let dir = file.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let (Ok(dir), Ok(abs)) = (dir.canonicalize(), target.canonicalize()) else {
        return target.display().to_string();
    };
    match abs.strip_prefix(&dir) {
        Ok(rel) => rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/"),
        Err(_) => abs.display().to_string(),
    }
}
