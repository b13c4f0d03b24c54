//! Event records and self-stabilization analytics over recorded runs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Mod,
    Neg,
    Eq,
    Neq,
    Lt,
}

impl OpKind {
    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Mod | OpKind::Neg
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Mod => "mod",
            OpKind::Neg => "neg",
            OpKind::Eq => "eq",
            OpKind::Neq => "neq",
            OpKind::Lt => "lt",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Outcome {
    Int(i64),
    Bool(bool),
}

/// One intercepted operator application.
///
/// `lhs_clean`/`rhs_clean` are the operand values the operator received and
/// `clean_result` is the operator's undeviated result on them, so
/// `emitted_result == clean_result` whenever `deviated` is false.
/// `lhs_poisoned`/`rhs_poisoned` record the operands' poison state before the
/// operation. `origin_id` and `lifetime_after` describe the governing operand.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OperatorEvent {
    pub step: u64,
    pub op: OpKind,
    pub lhs_clean: i64,
    pub rhs_clean: Option<i64>,
    pub lhs_poisoned: bool,
    pub rhs_poisoned: bool,
    pub deviated: bool,
    pub clean_result: Outcome,
    pub emitted_result: Outcome,
    pub suppressed: bool,
    pub origin_id: Option<u64>,
    pub lifetime_after: Option<u64>,
}

impl OperatorEvent {
    /// An unsuppressed operation with at least one poisoned operand.
    pub fn is_use(&self) -> bool {
        !self.suppressed && (self.lhs_poisoned || self.rhs_poisoned)
    }
}

/// A privilege vector printed when a node fires.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SnapshotEvent {
    pub round: u32,
    pub firing_node: usize,
    pub line: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub scenario_digest: String,
    pub seed: u64,
    pub events: Vec<OperatorEvent>,
    pub snapshots: Vec<SnapshotEvent>,
    /// Observed status of every node at the end of the run.
    pub final_statuses: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("empty snapshot line")]
    Empty,
    #[error("field {index} of snapshot line is {field:?}, expected \"0\" or \"1\"")]
    BadField { index: usize, field: String },
}

/// Number of privileged nodes in a snapshot line.
pub fn token_count(line: &str) -> Result<usize, LineError> {
    if line.is_empty() {
        return Err(LineError::Empty);
    }
    line.split(',')
        .enumerate()
        .try_fold(0, |count, (index, field)| match field {
            "0" => Ok(count),
            "1" => Ok(count + 1),
            _ => Err(LineError::BadField {
                index,
                field: field.into(),
            }),
        })
}

pub fn is_legitimate(line: &str) -> Result<bool, LineError> {
    token_count(line).map(|n| n == 1)
}

/// Smallest snapshot index from which every snapshot is legitimate.
///
/// `None` when the record has no snapshots or its last snapshot is not
/// legitimate. Malformed lines count as illegitimate.
pub fn convergence_point(record: &RunRecord) -> Option<usize> {
    convergence_point_of(record.snapshots.iter().map(|s| s.line.as_str()))
}

pub fn convergence_point_of<'a, I>(lines: I) -> Option<usize>
where
    I: IntoIterator<Item = &'a str>,
    I::IntoIter: DoubleEndedIterator + ExactSizeIterator,
{
    let lines = lines.into_iter();
    let len = lines.len();
    let legitimate_suffix = lines
        .rev()
        .take_while(|line| is_legitimate(line).unwrap_or(false))
        .count();
    (legitimate_suffix > 0).then(|| len - legitimate_suffix)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationStats {
    pub uses: u64,
    pub deviations: u64,
    /// `deviations / uses`, or 0 without uses.
    pub rate: f64,
}

impl DeviationStats {
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a OperatorEvent>) -> Self {
        let (uses, deviations) = events
            .into_iter()
            .filter(|e| e.is_use())
            .fold((0u64, 0u64), |(u, d), e| (u + 1, d + u64::from(e.deviated)));
        let rate = if uses == 0 {
            0.0
        } else {
            deviations as f64 / uses as f64
        };
        DeviationStats {
            uses,
            deviations,
            rate,
        }
    }
}

pub fn deviation_stats(record: &RunRecord) -> DeviationStats {
    DeviationStats::from_events(&record.events)
}
