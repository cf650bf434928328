use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::mass::{FocalJson, MassFunction};
use crate::error::{Error, Result};

/// An identified, timestamped piece of evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub id: String,
    /// Seconds since the epoch.
    pub timestamp: f64,
    pub mass: MassFunction,
    pub source: String,
}

impl Report {
    pub fn new(id: impl Into<String>, timestamp: f64, mass: MassFunction, source: impl Into<String>) -> Result<Self> {
        if !(timestamp.is_finite() && timestamp >= 0.0) {
            return Err(Error::InvalidTimestamp(timestamp));
        }
        Ok(Self {
            id: id.into(),
            timestamp,
            mass,
            source: source.into(),
        })
    }

    pub fn frame(&self) -> &Arc<Frame> {
        self.mass.frame()
    }

    /// Same report carrying a different mass function.
    pub fn with_mass(&self, mass: MassFunction) -> Self {
        Self { mass, ..self.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReportJson {
    id: String,
    timestamp: f64,
    #[serde(default)]
    source: String,
    frame: Vec<String>,
    focal: Vec<FocalJson>,
}

impl Serialize for Report {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let parts = self.mass.to_json_parts();
        ReportJson {
            id: self.id.clone(),
            timestamp: self.timestamp,
            source: self.source.clone(),
            frame: parts.frame,
            focal: parts.focal,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Report {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = ReportJson::deserialize(deserializer)?;
        FrameInterner::default().build(json).map_err(serde::de::Error::custom)
    }
}

/// Shares one `Arc<Frame>` among reports that name the same labels.
#[derive(Debug, Default)]
pub struct FrameInterner {
    frames: HashMap<Vec<String>, Arc<Frame>>,
}

impl FrameInterner {
    pub fn intern(&mut self, labels: Vec<String>) -> Result<Arc<Frame>> {
        if let Some(f) = self.frames.get(&labels) {
            return Ok(f.clone());
        }
        let frame = Frame::shared(labels.clone())?;
        self.frames.insert(labels, frame.clone());
        Ok(frame)
    }

    fn build(&mut self, json: ReportJson) -> Result<Report> {
        let frame = self.intern(json.frame)?;
        let mass = MassFunction::from_json_parts(frame, &json.focal)?;
        Report::new(json.id, json.timestamp, mass, json.source)
    }

    /// Parses one NDJSON line into a validated report.
    pub fn parse_line(&mut self, line: &str) -> Result<Report> {
        let json: ReportJson = serde_json::from_str(line)?;
        self.build(json)
    }
}

/// Reads an NDJSON report stream; blank lines are skipped, ids must be unique.
pub fn read_reports<R: BufRead>(reader: R) -> Result<Vec<Report>> {
    let mut interner = FrameInterner::default();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let report = interner.parse_line(&line)?;
        if !seen.insert(report.id.clone()) {
            return Err(Error::DuplicateReportId(report.id));
        }
        out.push(report);
    }
    Ok(out)
}

pub fn write_reports<W: Write>(mut writer: W, reports: &[Report]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
