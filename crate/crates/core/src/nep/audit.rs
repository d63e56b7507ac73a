use std::io::{self, Write};

use faer::c64;
use serde::{Deserialize, Serialize};

use super::Disk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    /// Validation magnitude between the two thresholds; a smaller disk is examined.
    Refine,
    /// Validation magnitude above the reject threshold.
    Discarded,
    /// Borderline candidate at the recursion limit.
    DepthExhausted,
    /// Outside its disk but inside another disk of the cover.
    HandledElsewhere,
    /// Outside its disk and every other disk; examined on a fresh disk.
    Rerouted,
    /// Outside the search region.
    OutsideRegion,
    Duplicate,
}

/// One record of the solver's audit trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Cover { disks: Vec<Disk> },
    Indicator { disk_id: usize, value: f64, normalized: f64, kept: bool },
    SubspaceGrown { disk_id: usize, l1: usize },
    Beyn { disk_id: usize, l1: usize, rank: usize, singular_values: Vec<f64> },
    Spawn { disk_id: usize, parent: usize, disk: Disk, depth: usize, reason: Decision },
    Candidate { disk_id: usize, k: c64, inside: bool, metric: Option<f64>, decision: Decision },
    DiskFailed { disk_id: usize, error: String },
}

/// Append-only list of audit events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub events: Vec<AuditEvent>,
}

impl AuditLog {
    pub fn push(&mut self, e: AuditEvent) {
        self.events.push(e);
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn decisions(&self) -> impl Iterator<Item = (usize, c64, Decision)> + '_ {
        self.events.iter().filter_map(|e| match *e {
            AuditEvent::Candidate { disk_id, k, decision, .. } => Some((disk_id, k, decision)),
            _ => None,
        })
    }
}
