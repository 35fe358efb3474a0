//! Target dataset: one JSON line per demonstrated step, extending the
//! demonstration step line with `p_sota`, `colliding` and `target`.

use std::io::{BufRead, Write};
use std::path::Path;

use navfuse_core::fusion::TargetRecord;
use navfuse_core::gridworld::{ActionDistribution, ActionSet, Sighting};
use serde::{Deserialize, Serialize};

use super::lines::{action, Lines, ObsFields};
use super::{create, open, FormatError};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetLine {
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
    p_sota: [f64; 6],
    colliding: Vec<u8>,
    target: [f64; 6],
}

pub struct TargetWriter<W: Write> {
    out: W,
}

impl<W: Write> TargetWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, r: &TargetRecord) -> std::io::Result<()> {
        let o = ObsFields::from_obs(&r.obs);
        let line = TargetLine {
            episode_id: r.episode_id.clone(),
            t: r.t,
            patch: o.patch,
            gps: o.gps,
            compass: o.compass,
            prev_action: o.prev_action,
            goal: o.goal,
            collided_last: o.collided_last,
            sighting: o.sighting,
            depth: o.depth,
            action: r.action.index() as u8,
            collided: r.collided,
            p_sota: *r.p_sota.probs(),
            colliding: r.colliding.iter().map(|a| a.index() as u8).collect(),
            target: *r.target.probs(),
        };
        serde_json::to_writer(&mut self.out, &line)?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub struct TargetReader<R> {
    lines: Lines<R>,
    failed: bool,
}

impl<R: BufRead> TargetReader<R> {
    pub fn new(input: R, source: impl Into<String>) -> Self {
        Self {
            lines: Lines::new(input, source.into()),
            failed: false,
        }
    }

    fn read_one(&mut self) -> Result<Option<TargetRecord>, FormatError> {
        if !self.lines.advance()? {
            return Ok(None);
        }
        let l: TargetLine = self.lines.parse()?;
        let err = |f: &str, m: String| self.lines.field_error(f, m);
        let obs = ObsFields {
            patch: l.patch,
            gps: l.gps,
            compass: l.compass,
            prev_action: l.prev_action,
            goal: l.goal,
            collided_last: l.collided_last,
            sighting: l.sighting,
            depth: l.depth,
        }
        .into_obs()
        .map_err(|(f, m)| err(f, m))?;
        let mut colliding = ActionSet::default();
        for &i in &l.colliding {
            colliding.insert(action(i).map_err(|m| err("colliding", m))?);
        }
        Ok(Some(TargetRecord {
            episode_id: l.episode_id,
            t: l.t,
            obs,
            action: action(l.action).map_err(|m| err("action", m))?,
            collided: l.collided,
            p_sota: ActionDistribution::new(l.p_sota).map_err(|e| err("p_sota", e.to_string()))?,
            colliding,
            target: ActionDistribution::new(l.target).map_err(|e| err("target", e.to_string()))?,
        }))
    }
}

impl<R: BufRead> Iterator for TargetReader<R> {
    type Item = Result<TargetRecord, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.read_one().transpose();
        if matches!(r, Some(Err(_))) {
            self.failed = true;
        }
        r
    }
}

pub fn write_targets<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a TargetRecord>,
) -> Result<(), FormatError> {
    let mut w = TargetWriter::new(create(path)?);
    for r in records {
        w.write(r).map_err(|e| FormatError::io(path, e))?;
    }
    w.finish().map_err(|e| FormatError::io(path, e))?;
    Ok(())
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetRecord>, FormatError> {
    TargetReader::new(open(path)?, path.display().to_string()).collect()
}
