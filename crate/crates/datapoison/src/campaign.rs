//! Running scenarios and aggregating their results.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use datapoison_core::ring::run;
use datapoison_core::{
    convergence_point, deviation_stats, token_count, DeviationStats, EvalContext, RingError,
    RunRecord,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::{EffectSpec, InjectionKindSpec, LifetimeSpec, Rate, Scenario, TransientUses};

/// The first snapshot lines of the fault-free five-node ring.
pub const GOLDEN_PREFIX: [&str; 7] = [
    "1,0,0,0,0",
    "0,1,0,0,0",
    "0,0,1,0,0",
    "0,0,0,1,0",
    "0,0,0,0,1",
    "1,0,0,0,0",
    "0,1,0,0,0",
];

pub fn execute(scenario: &Scenario) -> Result<RunRecord, RingError> {
    let mut ctx = EvalContext::new(Vec::new());
    let outcome = run(&scenario.ring, &scenario.injections, &mut ctx)?;
    Ok(RunRecord {
        scenario_digest: scenario.digest(),
        seed: scenario.seed,
        events: ctx.into_sink(),
        snapshots: outcome.snapshots,
        final_statuses: outcome.state.status_values(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub snapshots: usize,
    /// token count -> number of snapshots
    pub token_histogram: BTreeMap<usize, usize>,
    pub convergence_point: Option<usize>,
    pub deviations: DeviationStats,
}

impl Summary {
    pub fn of(record: &RunRecord) -> Self {
        let mut token_histogram = BTreeMap::new();
        for s in &record.snapshots {
            let tokens = token_count(&s.line).expect("ring emits well-formed lines");
            *token_histogram.entry(tokens).or_insert(0) += 1;
        }
        Summary {
            snapshots: record.snapshots.len(),
            token_histogram,
            convergence_point: convergence_point(record),
            deviations: deviation_stats(record),
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "snapshots: {}", self.snapshots)?;
        let histogram: Vec<String> = self
            .token_histogram
            .iter()
            .map(|(tokens, n)| format!("{tokens}:{n}"))
            .collect();
        writeln!(
            f,
            "token histogram (tokens:snapshots): {}",
            histogram.join(" ")
        )?;
        match self.convergence_point {
            Some(i) => writeln!(f, "convergence point: snapshot {i}")?,
            None => writeln!(f, "convergence point: none")?,
        }
        let d = &self.deviations;
        writeln!(
            f,
            "deviations: {} of {} poisoned uses (rate {:.4})",
            d.deviations, d.uses, d.rate
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: expected {expected:?}, got {}", got.as_deref().map_or("end of output".to_string(), |g| format!("{g:?}")))]
pub struct GoldenMismatch {
    /// 1-based
    pub line: usize,
    pub expected: &'static str,
    pub got: Option<String>,
}

/// Compares the leading lines of `lines` with [`GOLDEN_PREFIX`] byte for byte.
pub fn check_golden<S: AsRef<str>>(lines: &[S]) -> Result<(), GoldenMismatch> {
    for (i, expected) in GOLDEN_PREFIX.iter().enumerate() {
        let got = lines.get(i).map(AsRef::as_ref);
        if got != Some(*expected) {
            return Err(GoldenMismatch {
                line: i + 1,
                expected,
                got: got.map(str::to_owned),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Rate,
    TransientUses,
}

impl FromStr for SweepParam {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rate" => Ok(SweepParam::Rate),
            "transient_uses" => Ok(SweepParam::TransientUses),
            other => Err(SweepError::UnknownParam(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue {
    Rate(Rate),
    TransientUses(TransientUses),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Rate(r) => write!(f, "{}", r.get()),
            SweepValue::TransientUses(n) => write!(f, "{}", n.get()),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("--param: unknown parameter {0:?}; expected \"rate\" or \"transient_uses\"")]
    UnknownParam(String),
    #[error("--values: no values")]
    NoValues,
    #[error("--values: item {index} ({text:?}): {message}")]
    BadValue {
        index: usize,
        text: String,
        message: String,
    },
    #[error("--reps: at least one repetition is required")]
    NoRepetitions,
    #[error("--param: {0} is not applicable, the scenario has no poison injection")]
    NotApplicable(&'static str),
    #[error("value {value}, repetition {repetition}: {source}")]
    Run {
        value: String,
        repetition: u64,
        source: RingError,
    },
}

impl SweepError {
    /// Configuration problems as opposed to failures while running.
    pub fn is_config(&self) -> bool {
        !matches!(
            self,
            SweepError::Run {
                source: RingError::Arithmetic { .. },
                ..
            }
        )
    }
}

pub fn parse_values(param: SweepParam, csv: &str) -> Result<Vec<SweepValue>, SweepError> {
    let items: Vec<&str> = csv
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(SweepError::NoValues);
    }
    items
        .into_iter()
        .enumerate()
        .map(|(index, text)| {
            let bad = |message: String| SweepError::BadValue {
                index,
                text: text.to_owned(),
                message,
            };
            match param {
                SweepParam::Rate => {
                    let rate: f64 = text.parse().map_err(|e| bad(format!("{e}")))?;
                    Rate::new(rate)
                        .map(SweepValue::Rate)
                        .map_err(|e| bad(e.to_string()))
                }
                SweepParam::TransientUses => {
                    let uses: u32 = text.parse().map_err(|e| bad(format!("{e}")))?;
                    TransientUses::new(uses)
                        .map(SweepValue::TransientUses)
                        .map_err(|e| bad(e.to_string()))
                }
            }
        })
        .collect()
}

/// The base scenario with `value` applied to every poison injection.
pub fn apply(base: &Scenario, value: SweepValue) -> Result<Scenario, SweepError> {
    let mut spec = base.spec().clone();
    let mut applied = false;
    for inj in &mut spec.injections {
        if let InjectionKindSpec::Poison(policy) = &mut inj.kind {
            match value {
                SweepValue::Rate(r) => policy.effect = EffectSpec::Intermittent(r),
                SweepValue::TransientUses(n) => policy.lifetime = LifetimeSpec::Transient(n),
            }
            applied = true;
        }
    }
    if !applied {
        return Err(SweepError::NotApplicable(match value {
            SweepValue::Rate(_) => "rate",
            SweepValue::TransientUses(_) => "transient_uses",
        }));
    }
    Ok(Scenario::from_spec(spec).expect("only policy fields changed"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: SweepValue,
    pub runs: usize,
    pub converged: usize,
    /// Over converged runs only.
    pub mean_convergence: Option<f64>,
    pub max_convergence: Option<usize>,
    pub mean_deviation_rate: f64,
}

/// Runs `repetitions` seeds (`base.seed + r`) for every value.
///
/// Repetitions run in parallel; rows are assembled by (value, repetition)
/// index so the result does not depend on scheduling.
pub fn sweep(
    base: &Scenario,
    values: &[SweepValue],
    repetitions: u64,
) -> Result<Vec<SweepRow>, SweepError> {
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    if repetitions == 0 {
        return Err(SweepError::NoRepetitions);
    }
    let scenarios = values
        .iter()
        .map(|&v| apply(base, v))
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|v| (0..repetitions).map(move |r| (v, r)))
        .collect();
    let summaries = jobs
        .par_iter()
        .map(|&(v, r)| {
            let scenario = scenarios[v].clone().with_seed(base.seed.wrapping_add(r));
            execute(&scenario)
                .map(|record| Summary::of(&record))
                .map_err(|source| SweepError::Run {
                    value: values[v].to_string(),
                    repetition: r,
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(summaries
        .chunks(repetitions as usize)
        .zip(values)
        .map(|(runs, &value)| {
            let points: Vec<usize> = runs.iter().filter_map(|s| s.convergence_point).collect();
            SweepRow {
                value,
                runs: runs.len(),
                converged: points.len(),
                mean_convergence: (!points.is_empty())
                    .then(|| points.iter().sum::<usize>() as f64 / points.len() as f64),
                max_convergence: points.iter().copied().max(),
                mean_deviation_rate: runs.iter().map(|s| s.deviations.rate).sum::<f64>()
                    / runs.len() as f64,
            }
        })
        .collect())
}

pub fn format_sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:<10} {:>6} {:>10} {:>17} {:>16} {:>19}\n",
        "value", "runs", "converged", "mean_convergence", "max_convergence", "mean_deviation_rate"
    );
    for row in rows {
        let mean = row
            .mean_convergence
            .map_or_else(|| "-".to_owned(), |m| format!("{m:.2}"));
        let max = row
            .max_convergence
            .map_or_else(|| "-".to_owned(), |m| m.to_string());
        out.push_str(&format!(
            "{:<10} {:>6} {:>10} {:>17} {:>16} {:>19.4}\n",
            row.value.to_string(),
            row.runs,
            row.converged,
            mean,
            max,
            row.mean_deviation_rate
        ));
    }
    out
}
