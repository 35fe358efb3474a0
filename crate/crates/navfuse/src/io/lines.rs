use std::io::BufRead;

use navfuse_core::gridworld::{Action, GoalCategory, Observation, Sighting};
use serde::de::DeserializeOwned;

use super::FormatError;

/// Line reader that keeps a single reusable buffer and tracks 1-based line
/// numbers; blank lines are skipped.
pub(crate) struct Lines<R> {
    inner: R,
    pub(crate) source: String,
    pub(crate) line: usize,
    pub(crate) buf: String,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(inner: R, source: String) -> Self {
        Self {
            inner,
            source,
            line: 0,
            buf: String::new(),
        }
    }

    /// Advances to the next non-blank line; `false` at end of input.
    pub(crate) fn advance(&mut self) -> Result<bool, FormatError> {
        loop {
            self.buf.clear();
            let n = self.inner.read_line(&mut self.buf).map_err(|e| FormatError::Io {
                path: self.source.clone(),
                cause: e,
            })?;
            if n == 0 {
                return Ok(false);
            }
            self.line += 1;
            if !self.buf.trim().is_empty() {
                return Ok(true);
            }
        }
    }

    pub(crate) fn parse<T: DeserializeOwned>(&self) -> Result<T, FormatError> {
        parse_json(&self.buf, &self.source, self.line)
    }

    pub(crate) fn field_error(&self, field: &str, message: impl ToString) -> FormatError {
        FormatError::Field {
            path: self.source.clone(),
            line: self.line,
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, source: &str, line: usize) -> Result<T, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        // missing fields are reported at the enclosing object
        let field = match message.strip_prefix("missing field `") {
            Some(rest) => {
                let name = rest.split('`').next().unwrap_or_default();
                if path == "." { name.to_string() } else { format!("{path}.{name}") }
            }
            None => path,
        };
        FormatError::Field {
            path: source.to_string(),
            line,
            field,
            message,
        }
    })
}

/// Observation fields shared by demonstration and target step lines, which
/// list them flat.
pub(crate) struct ObsFields {
    pub patch: Vec<u8>,
    pub gps: [f64; 2],
    pub compass: f64,
    pub prev_action: Option<u8>,
    pub goal: u8,
    pub collided_last: bool,
    pub sighting: Option<Sighting>,
    pub depth: [f64; 5],
}

impl ObsFields {
    pub(crate) fn from_obs(obs: &Observation) -> Self {
        Self {
            patch: obs.patch.to_vec(),
            gps: obs.gps,
            compass: obs.compass,
            prev_action: obs.prev_action.map(|a| a.index() as u8),
            goal: obs.goal.index() as u8,
            collided_last: obs.collided_last,
            sighting: obs.sighting,
            depth: obs.depth,
        }
    }

    /// Validates ranges; the error is `(field, message)`.
    pub(crate) fn into_obs(self) -> Result<Observation, (&'static str, String)> {
        let patch: [u8; 121] = self
            .patch
            .try_into()
            .map_err(|v: Vec<u8>| ("patch", format!("expected 121 entries, found {}", v.len())))?;
        if let Some(v) = patch.iter().find(|&&v| v > 1) {
            return Err(("patch", format!("entries must be 0 or 1, found {v}")));
        }
        let prev_action = match self.prev_action {
            None => None,
            Some(i) => Some(action(i).map_err(|m| ("prev_action", m))?),
        };
        let goal = GoalCategory::from_index(self.goal as usize)
            .ok_or(("goal", format!("goal index {} out of range 0..6", self.goal)))?;
        Ok(Observation {
            patch,
            gps: self.gps,
            compass: self.compass,
            prev_action,
            goal,
            collided_last: self.collided_last,
            sighting: self.sighting,
            depth: self.depth,
        })
    }
}

pub(crate) fn action(i: u8) -> Result<Action, String> {
    Action::from_index(i as usize).ok_or_else(|| format!("action index {i} out of range 0..6"))
}
