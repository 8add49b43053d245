use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

pub type FrameId = u64;
pub type Tick = u64;

/// One record of the SLAM output: a new frame, or a revised estimate of an old one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEvent {
    #[serde(rename = "t")]
    pub time: Tick,
    #[serde(rename = "frame")]
    pub frame_id: FrameId,
    #[serde(rename = "new")]
    pub is_new_frame: bool,
    pub pose: Pose,
}

impl PoseEvent {
    pub fn new_frame(time: Tick, frame_id: FrameId, pose: Pose) -> Self {
        Self { time, frame_id, is_new_frame: true, pose }
    }

    pub fn update(time: Tick, frame_id: FrameId, pose: Pose) -> Self {
        Self { time, frame_id, is_new_frame: false, pose }
    }
}

/// A validated, time-ordered sequence of pose events.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoseStream {
    events: Vec<PoseEvent>,
}

impl PoseStream {
    /// Validates ordering: non-decreasing time, each frame introduced once by
    /// a new-frame event before any update to it.
    pub fn new(events: Vec<PoseEvent>) -> Result<Self> {
        let mut known = HashSet::new();
        let mut last_time = None;
        for (i, e) in events.iter().enumerate() {
            let position = i + 1;
            if let Some(t) = last_time {
                if e.time < t {
                    return Err(Error::Stream { position, reason: format!("time {} regresses from {t}", e.time) });
                }
            }
            last_time = Some(e.time);
            if e.is_new_frame {
                if !known.insert(e.frame_id) {
                    return Err(Error::Stream { position, reason: format!("frame {} introduced twice", e.frame_id) });
                }
            } else if !known.contains(&e.frame_id) {
                return Err(Error::Stream {
                    position,
                    reason: format!("update to frame {} before its new-frame event", e.frame_id),
                });
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[PoseEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_time(&self) -> Option<Tick> {
        self.events.last().map(|e| e.time)
    }

    pub fn update_count(&self) -> usize {
        self.events.iter().filter(|e| !e.is_new_frame).count()
    }

    /// Events grouped by tick, in stream order.
    pub fn ticks(&self) -> impl Iterator<Item = (Tick, &[PoseEvent])> {
        self.events.chunk_by(|a, b| a.time == b.time).map(|chunk| (chunk[0].time, chunk))
    }

    /// Reads JSON Lines; blank lines are skipped. Errors carry the 1-based line.
    pub fn read_jsonl(r: impl BufRead) -> Result<Self> {
        let mut events = Vec::new();
        let mut lines = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(format!("stream line {}", n + 1), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: PoseEvent =
                serde_json::from_str(&line).map_err(|e| Error::Json { line: n + 1, message: e.to_string() })?;
            events.push(event);
            lines.push(n + 1);
        }
        // Report stream errors against file lines rather than event indices.
        Self::new(events).map_err(|e| match e {
            Error::Stream { position, reason } => Error::Stream { position: lines[position - 1], reason },
            other => other,
        })
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
