//! NVF1 parameter files for the BC policy and the student.

use std::path::Path;

use navfuse_core::histpolicy::PolicyParams;
use navfuse_core::student::StudentParams;

use super::FormatError;

fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn read_policy(path: &Path) -> Result<PolicyParams, FormatError> {
    PolicyParams::from_bytes(&read_bytes(path)?).map_err(|e| FormatError::content(path, e))
}

pub fn write_policy(path: &Path, params: &PolicyParams) -> Result<(), FormatError> {
    write_bytes(path, &params.to_bytes())
}

pub fn read_student(path: &Path) -> Result<StudentParams, FormatError> {
    StudentParams::from_bytes(&read_bytes(path)?).map_err(|e| FormatError::content(path, e))
}

pub fn write_student(path: &Path, params: &StudentParams) -> Result<(), FormatError> {
    write_bytes(path, &params.to_bytes())
}
