use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EventInterval;
use crate::error::{Error, Result};

/// One row of an events CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub spectrogram_id: String,
    pub look_angle: f64,
    pub raw_start: usize,
    pub raw_end: usize,
    pub start: usize,
    pub end: usize,
}

impl EventRecord {
    pub fn new(spectrogram_id: &str, look_angle: f64, ev: &EventInterval) -> Self {
        Self {
            spectrogram_id: spectrogram_id.to_string(),
            look_angle,
            raw_start: ev.raw_start,
            raw_end: ev.raw_end,
            start: ev.start,
            end: ev.end,
        }
    }

    pub fn interval(&self) -> EventInterval {
        EventInterval {
            start: self.start,
            end: self.end,
            raw_start: self.raw_start,
            raw_end: self.raw_end,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(format!("{}: {e}", path.display()))
}

/// Writes the header even when there are no events.
pub fn write_events_csv(path: &Path, records: &[EventRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(["spectrogram_id", "look_angle", "raw_start", "raw_end", "start", "end"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}
