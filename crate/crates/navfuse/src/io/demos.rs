//! Demonstration corpus: JSON Lines with one header line per episode
//! followed by one line per step.
//!
//! ```text
//! {"kind":"episode","id":"map-003-7","map_path":"maps/map-003.json","start":{...},"goal":"bed","d_init_m":4.1,"steps":31,"success":true}
//! {"kind":"step","episode_id":"map-003-7","t":0,"patch":[...121],"gps":[0.0,0.0],"compass":0.0,"prev_action":null,"goal":1,...}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use navfuse_core::expert::{DemoStep, DemonstrationRecord};
use navfuse_core::gridworld::{Episode, GoalCategory, Pose, Sighting};
use serde::{Deserialize, Serialize};

use super::lines::{action, Lines, ObsFields};
use super::{create, open, FormatError};

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
enum LineKind {
    Episode,
    Step,
}

#[derive(Deserialize)]
struct Probe {
    kind: LineKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    kind: LineKind,
    id: String,
    map_path: String,
    start: Pose,
    goal: GoalCategory,
    d_init_m: f64,
    steps: usize,
    success: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepLine {
    kind: LineKind,
    episode_id: String,
    t: usize,
    patch: Vec<u8>,
    gps: [f64; 2],
    compass: f64,
    prev_action: Option<u8>,
    goal: u8,
    collided_last: bool,
    sighting: Option<Sighting>,
    depth: [f64; 5],
    action: u8,
    collided: bool,
}

/// Streams demonstrations out to any writer.
pub struct DemoWriter<W: Write> {
    out: W,
}

impl<W: Write> DemoWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, rec: &DemonstrationRecord) -> std::io::Result<()> {
        let ep = &rec.episode;
        let header = HeaderLine {
            kind: LineKind::Episode,
            id: ep.id.clone(),
            map_path: ep.map_id.clone(),
            start: ep.start,
            goal: ep.goal,
            d_init_m: ep.d_init_m,
            steps: rec.steps.len(),
            success: rec.success,
        };
        serde_json::to_writer(&mut self.out, &header)?;
        self.out.write_all(b"\n")?;
        for (t, s) in rec.steps.iter().enumerate() {
            let o = ObsFields::from_obs(&s.obs);
            let line = StepLine {
                kind: LineKind::Step,
                episode_id: ep.id.clone(),
                t,
                patch: o.patch,
                gps: o.gps,
                compass: o.compass,
                prev_action: o.prev_action,
                goal: o.goal,
                collided_last: o.collided_last,
                sighting: o.sighting,
                depth: o.depth,
                action: s.action.index() as u8,
                collided: s.collided,
            };
            serde_json::to_writer(&mut self.out, &line)?;
            self.out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a corpus one episode at a time; memory use is bounded by the
/// longest episode, not the file.
pub struct DemoReader<R> {
    lines: Lines<R>,
    failed: bool,
}

impl<R: BufRead> DemoReader<R> {
    /// `source` names the input in error messages.
    pub fn new(input: R, source: impl Into<String>) -> Self {
        Self {
            lines: Lines::new(input, source.into()),
            failed: false,
        }
    }

    fn kind(&self) -> Result<LineKind, FormatError> {
        Ok(self.lines.parse::<Probe>()?.kind)
    }

    fn read_record(&mut self) -> Result<Option<DemonstrationRecord>, FormatError> {
        if !self.lines.advance()? {
            return Ok(None);
        }
        if self.kind()? != LineKind::Episode {
            return Err(self.lines.field_error("kind", "expected an episode header line"));
        }
        let h: HeaderLine = self.lines.parse()?;
        if !(h.d_init_m > 0.0) {
            return Err(self.lines.field_error("d_init_m", "must be positive"));
        }
        let header_line = self.lines.line;
        let mut steps = Vec::with_capacity(h.steps);
        for t in 0..h.steps {
            if !self.lines.advance()? {
                return Err(FormatError::Line {
                    path: self.lines.source.clone(),
                    line: self.lines.line + 1,
                    message: format!(
                        "unexpected end of file: episode `{}` (line {header_line}) declares {} steps, found {t}",
                        h.id, h.steps
                    ),
                });
            }
            if self.kind()? != LineKind::Step {
                return Err(self.lines.field_error(
                    "kind",
                    format!("episode `{}` declares {} steps, found {t}", h.id, h.steps),
                ));
            }
            let s: StepLine = self.lines.parse()?;
            if s.episode_id != h.id {
                return Err(self.lines.field_error(
                    "episode_id",
                    format!("expected `{}`, found `{}`", h.id, s.episode_id),
                ));
            }
            if s.t != t {
                return Err(self.lines.field_error("t", format!("expected {t}, found {}", s.t)));
            }
            let obs = ObsFields {
                patch: s.patch,
                gps: s.gps,
                compass: s.compass,
                prev_action: s.prev_action,
                goal: s.goal,
                collided_last: s.collided_last,
                sighting: s.sighting,
                depth: s.depth,
            }
            .into_obs()
            .map_err(|(f, m)| self.lines.field_error(f, m))?;
            let act = action(s.action).map_err(|m| self.lines.field_error("action", m))?;
            steps.push(DemoStep {
                obs,
                action: act,
                collided: s.collided,
            });
        }
        Ok(Some(DemonstrationRecord {
            episode: Episode {
                id: h.id,
                map_id: h.map_path,
                start: h.start,
                goal: h.goal,
                d_init_m: h.d_init_m,
            },
            steps,
            success: h.success,
        }))
    }
}

impl<R: BufRead> Iterator for DemoReader<R> {
    type Item = Result<DemonstrationRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.read_record().transpose();
        if matches!(r, Some(Err(_))) {
            self.failed = true;
        }
        r
    }
}

pub fn write_demos<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a DemonstrationRecord>,
) -> Result<(), FormatError> {
    let mut w = DemoWriter::new(create(path)?);
    for r in records {
        w.write(r).map_err(|e| FormatError::io(path, e))?;
    }
    w.finish().map_err(|e| FormatError::io(path, e))?;
    Ok(())
}

/// Opens a corpus for streaming.
pub fn read_demos(path: &Path) -> Result<DemoReader<impl BufRead>, FormatError> {
    Ok(DemoReader::new(open(path)?, path.display().to_string()))
}
