//! Newline-delimited JSON traces.
//!
//! A trace holds one record per line, distinguished by `"type"`:
//!
//! * `run`: header with `scenario_digest` and `seed`, always first;
//! * `event`: one intercepted operator, fields as in [`OperatorEvent`];
//! * `snapshot`: one privilege line, fields as in [`SnapshotEvent`];
//! * `final`: `final_statuses`, always last.
//!
//! Events come before snapshots, each in emission order.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use datapoison_core::{OperatorEvent, RunRecord, SnapshotEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Run { scenario_digest: String, seed: u64 },
    Event(OperatorEvent),
    Snapshot(SnapshotEvent),
    Final { final_statuses: Vec<i64> },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trace line {line}: {source}")]
    Syntax {
        line: usize,
        source: serde_json::Error,
    },
    #[error("trace line {line}: {message}")]
    Structure { line: usize, message: &'static str },
}

pub fn write_trace<W: Write>(record: &RunRecord, mut out: W) -> io::Result<()> {
    let mut put = |line: &TraceLine| -> io::Result<()> {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")
    };
    put(&TraceLine::Run {
        scenario_digest: record.scenario_digest.clone(),
        seed: record.seed,
    })?;
    for event in &record.events {
        put(&TraceLine::Event(event.clone()))?;
    }
    for snapshot in &record.snapshots {
        put(&TraceLine::Snapshot(snapshot.clone()))?;
    }
    put(&TraceLine::Final {
        final_statuses: record.final_statuses.clone(),
    })?;
    out.flush()
}

pub fn write_trace_file(path: &Path, record: &RunRecord) -> io::Result<()> {
    write_trace(record, BufWriter::new(File::create(path)?))
}

pub fn read_trace<R: BufRead>(input: R) -> Result<RunRecord, TraceError> {
    let mut record: Option<RunRecord> = None;
    let mut finished = false;
    let mut last = 0;
    for (index, text) in input.lines().enumerate() {
        let line = index + 1;
        last = line;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let structure = |message| TraceError::Structure { line, message };
        if finished {
            return Err(structure("record after the final line"));
        }
        let parsed: TraceLine =
            serde_json::from_str(&text).map_err(|source| TraceError::Syntax { line, source })?;
        match (parsed, record.as_mut()) {
            (
                TraceLine::Run {
                    scenario_digest,
                    seed,
                },
                None,
            ) => {
                record = Some(RunRecord {
                    scenario_digest,
                    seed,
                    events: Vec::new(),
                    snapshots: Vec::new(),
                    final_statuses: Vec::new(),
                })
            }
            (TraceLine::Run { .. }, Some(_)) => return Err(structure("duplicate run header")),
            (_, None) => return Err(structure("trace must start with a run header")),
            (TraceLine::Event(event), Some(r)) => {
                if !r.snapshots.is_empty() {
                    return Err(structure("event after snapshots"));
                }
                if r.events.last().is_some_and(|prev| prev.step >= event.step) {
                    return Err(structure("event steps must strictly increase"));
                }
                r.events.push(event);
            }
            (TraceLine::Snapshot(snapshot), Some(r)) => r.snapshots.push(snapshot),
            (TraceLine::Final { final_statuses }, Some(r)) => {
                r.final_statuses = final_statuses;
                finished = true;
            }
        }
    }
    match record {
        Some(r) if finished => Ok(r),
        _ => Err(TraceError::Structure {
            line: last,
            message: "trace ended without a final line",
        }),
    }
}

pub fn read_trace_file(path: &Path) -> Result<RunRecord, TraceError> {
    read_trace(BufReader::new(File::open(path)?))
}
