//! Data-poisoning fault injection.
//!
//! A [`Scalar`] wraps a 64-bit integer. When poisoned, every operator applied
//! through an [`EvalContext`] may emit a deviated result according to its
//! [`PoisonPolicy`]: deterministic or intermittent effect, always or transient
//! lifetime, infectious or not. Every intercepted operation is recorded as an
//! [`OperatorEvent`].
//!
//! The [`ring`] module runs Dijkstra's K-state self-stabilizing token ring on
//! top of poisoned statuses, and [`trace`] analyses the resulting runs.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod poison;
pub mod ring;
pub mod trace;

pub use poison::{
    deviate, injection_rng, ArithOp, ArithmeticError, ArithmeticFault, BinOp, CmpOp,
    DeviationModel, Discard, Effect, EvalContext, EventSink, Lifetime, PoisonPolicy, PolicyError,
    Rational, RationalError, Scalar, Suppressed, Value,
};
pub use ring::{
    run, run_observed, validate_injections, Injection, InjectionKind, RingConfig, RingError,
    RingState, RunOutcome, DEFAULT_ROUNDS,
};
pub use trace::{
    convergence_point, convergence_point_of, deviation_stats, is_legitimate, token_count,
    DeviationStats, LineError, OpKind, OperatorEvent, Outcome, RunRecord, SnapshotEvent,
};
