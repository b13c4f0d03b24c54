//! Dijkstra's K-state self-stabilizing token ring over poisoned statuses.
//!
//! Nodes `0..n` form a ring where the left neighbour of node `i` is
//! `(i - 1) mod n`. Node 0 is privileged when its status equals its left
//! neighbour's and then increments its status modulo K; every other node is
//! privileged when its status differs from its left neighbour's and then
//! copies it. Rounds visit the nodes in the fixed order `0..n`.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::poison::{ArithmeticError, EvalContext, EventSink, PoisonPolicy, Scalar};
use crate::trace::SnapshotEvent;

pub const DEFAULT_ROUNDS: u32 = 10;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RingError {
    #[error("node_count: a ring needs at least one node")]
    NoNodes,
    #[error("k_states: K must exceed N (K = {k_states}, N = {})", node_count - 1)]
    KTooSmall { k_states: i64, node_count: usize },
    #[error("injections[{index}].node: node {node} is outside a {node_count}-node ring")]
    NodeOutOfRange {
        index: usize,
        node: usize,
        node_count: usize,
    },
    #[error("injections[{index}].at_round: round {at_round} is past the last round {rounds}")]
    RoundOutOfRange {
        index: usize,
        at_round: u32,
        rounds: u32,
    },
    #[error(
        "injections[{second}]: conflicts with injections[{first}] on node {node} at round {at_round}"
    )]
    ConflictingInjections {
        first: usize,
        second: usize,
        node: usize,
        at_round: u32,
    },
    #[error("status {status} is outside [0, {k_states})")]
    StatusOutOfRange { status: i64, k_states: i64 },
    #[error("node {node} in round {round}: {source}")]
    Arithmetic {
        node: usize,
        round: u32,
        source: ArithmeticError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RingConfig {
    node_count: usize,
    k_states: i64,
    rounds: u32,
    seed: u64,
}

impl RingConfig {
    pub fn new(
        node_count: usize,
        k_states: i64,
        rounds: u32,
        seed: u64,
    ) -> Result<Self, RingError> {
        if node_count == 0 {
            return Err(RingError::NoNodes);
        }
        // K > N where N = node_count - 1
        if k_states < 1 || (k_states as u64) < node_count as u64 {
            return Err(RingError::KTooSmall {
                k_states,
                node_count,
            });
        }
        Ok(RingConfig {
            node_count,
            k_states,
            rounds,
            seed,
        })
    }

    /// Uses the smallest legal K, one state per node.
    pub fn with_default_k(node_count: usize, rounds: u32, seed: u64) -> Result<Self, RingError> {
        let k_states = i64::try_from(node_count).map_err(|_| RingError::NoNodes)?;
        Self::new(node_count, k_states, rounds, seed)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn k_states(&self) -> i64 {
        self.k_states
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        RingConfig { seed, ..self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InjectionKind {
    /// Poison the node's current status.
    Poison(PoisonPolicy),
    /// Overwrite the status with a clean value.
    Perturb { new_status: i64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub node: usize,
    pub kind: InjectionKind,
    /// Applied at the start of this round; `rounds` means after the last one.
    pub at_round: u32,
}

impl Injection {
    pub fn poison(node: usize, at_round: u32, policy: PoisonPolicy) -> Self {
        Injection {
            node,
            kind: InjectionKind::Poison(policy),
            at_round,
        }
    }

    pub fn perturb(node: usize, at_round: u32, new_status: i64) -> Self {
        Injection {
            node,
            kind: InjectionKind::Perturb { new_status },
            at_round,
        }
    }
}

/// Checks every injection against the ring and against each other.
pub fn validate_injections(config: &RingConfig, injections: &[Injection]) -> Result<(), RingError> {
    for (index, inj) in injections.iter().enumerate() {
        if inj.node >= config.node_count {
            return Err(RingError::NodeOutOfRange {
                index,
                node: inj.node,
                node_count: config.node_count,
            });
        }
        if inj.at_round > config.rounds {
            return Err(RingError::RoundOutOfRange {
                index,
                at_round: inj.at_round,
                rounds: config.rounds,
            });
        }
        if let InjectionKind::Perturb { new_status } = inj.kind {
            check_status(new_status, config.k_states)?;
        }
        if let Some(first) = injections[..index]
            .iter()
            .position(|o| o.node == inj.node && o.at_round == inj.at_round)
        {
            return Err(RingError::ConflictingInjections {
                first,
                second: index,
                node: inj.node,
                at_round: inj.at_round,
            });
        }
    }
    Ok(())
}

fn check_status(status: i64, k_states: i64) -> Result<(), RingError> {
    if (0..k_states).contains(&status) {
        Ok(())
    } else {
        Err(RingError::StatusOutOfRange { status, k_states })
    }
}

/// Mutable references to two distinct slots.
fn pair_mut<T>(items: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = items.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = items.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingState {
    statuses: Vec<Scalar>,
    privilege: Vec<bool>,
    round: u32,
    k_states: i64,
}

impl RingState {
    /// Every node starts with the clean status 0.
    pub fn new(config: &RingConfig) -> Self {
        RingState {
            statuses: (0..config.node_count).map(|_| Scalar::clean(0)).collect(),
            privilege: alloc::vec![false; config.node_count],
            round: 0,
            k_states: config.k_states,
        }
    }

    pub fn from_statuses(statuses: &[i64], k_states: i64) -> Result<Self, RingError> {
        let config = RingConfig::new(statuses.len(), k_states, 0, 0)?;
        let mut state = RingState::new(&config);
        for (node, &s) in statuses.iter().enumerate() {
            state.perturb(node, s)?;
        }
        Ok(state)
    }

    pub fn node_count(&self) -> usize {
        self.statuses.len()
    }

    pub fn k_states(&self) -> i64 {
        self.k_states
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn statuses(&self) -> &[Scalar] {
        &self.statuses
    }

    pub fn status_values(&self) -> Vec<i64> {
        self.statuses.iter().map(Scalar::value).collect()
    }

    /// Privilege vector computed by the most recent [`out`](Self::out).
    pub fn privilege(&self) -> &[bool] {
        &self.privilege
    }

    pub fn left_of(&self, node: usize) -> usize {
        (node + self.node_count() - 1) % self.node_count()
    }

    /// Monitoring predicate, evaluated with poisoning suppressed.
    pub fn has_privilege<S: EventSink>(&self, node: usize, ctx: &mut EvalContext<S>) -> bool {
        let mut left = self.statuses[self.left_of(node)].clone();
        let mut own = self.statuses[node].clone();
        ctx.with_suppression(|ctx| {
            if node == 0 {
                ctx.eq(&mut left, &mut own)
            } else {
                ctx.ne(&mut left, &mut own)
            }
        })
        .expect("comparisons cannot fail")
    }

    /// Comma-separated privilege flags in node order, e.g. `1,0,0,0,0`.
    pub fn out<S: EventSink>(&mut self, ctx: &mut EvalContext<S>) -> String {
        let mut line = String::with_capacity(2 * self.node_count());
        for node in 0..self.node_count() {
            let privileged = self.has_privilege(node, ctx);
            self.privilege[node] = privileged;
            if node > 0 {
                line.push(',');
            }
            line.push(if privileged { '1' } else { '0' });
        }
        line
    }

    /// Replaces a status with a clean value, dropping any poison.
    pub fn perturb(&mut self, node: usize, new_status: i64) -> Result<(), RingError> {
        check_status(new_status, self.k_states)?;
        self.statuses[node] = Scalar::clean(new_status);
        Ok(())
    }

    /// Poisons the node's current status.
    pub fn poison(&mut self, node: usize, policy: PoisonPolicy, origin_id: u64, seed: u64) {
        let value = self.statuses[node].value();
        self.statuses[node] = Scalar::poisoned(value, policy, origin_id, seed);
    }

    /// Runs one node's guarded rule. Returns whether it fired.
    ///
    /// The guard is evaluated with poisoning active. When it holds, the
    /// snapshot is taken before the status changes.
    pub fn update<S: EventSink>(
        &mut self,
        node: usize,
        ctx: &mut EvalContext<S>,
        snapshots: &mut Vec<SnapshotEvent>,
    ) -> Result<bool, RingError> {
        let round = self.round;
        let arith = |source| RingError::Arithmetic {
            node,
            round,
            source,
        };
        let left = self.left_of(node);

        let fires = if left == node {
            // single-node ring: the node is its own left neighbour
            let mut l = self.statuses[node].clone();
            let mut s = self.statuses[node].clone();
            let fires = ctx.eq(&mut l, &mut s).map_err(arith)?;
            self.statuses[node] = l;
            fires
        } else {
            let (l, s) = pair_mut(&mut self.statuses, left, node);
            if node == 0 {
                ctx.eq(l, s).map_err(arith)?
            } else {
                ctx.ne(l, s).map_err(arith)?
            }
        };
        if !fires {
            return Ok(false);
        }

        let line = self.out(ctx);
        snapshots.push(SnapshotEvent {
            round,
            firing_node: node,
            line,
        });

        if node == 0 {
            let mut sum = ctx
                .add(&mut self.statuses[0], &mut Scalar::clean(1))
                .map_err(arith)?;
            self.statuses[0] = ctx
                .rem(&mut sum, &mut Scalar::clean(self.k_states))
                .map_err(arith)?;
        } else {
            self.statuses[node] = self.statuses[left].clone();
        }
        Ok(true)
    }

    fn apply(&mut self, index: usize, injection: &Injection, seed: u64) -> Result<(), RingError> {
        match injection.kind {
            InjectionKind::Poison(policy) => {
                self.poison(injection.node, policy, index as u64, seed);
                Ok(())
            }
            InjectionKind::Perturb { new_status } => self.perturb(injection.node, new_status),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub state: RingState,
    pub snapshots: Vec<SnapshotEvent>,
}

/// Runs `config.rounds()` rounds from the all-zero state.
///
/// Injections apply at the start of their round in list order; the list
/// index is the origin id of a poison injection.
pub fn run<S: EventSink>(
    config: &RingConfig,
    injections: &[Injection],
    ctx: &mut EvalContext<S>,
) -> Result<RunOutcome, RingError> {
    run_observed(config, injections, ctx, |_, _| {})
}

/// Like [`run`], calling `observe` after every node update.
pub fn run_observed<S, F>(
    config: &RingConfig,
    injections: &[Injection],
    ctx: &mut EvalContext<S>,
    mut observe: F,
) -> Result<RunOutcome, RingError>
where
    S: EventSink,
    F: FnMut(&mut RingState, &mut EvalContext<S>),
{
    validate_injections(config, injections)?;
    let mut state = RingState::new(config);
    let mut snapshots = Vec::new();
    for round in 0..=config.rounds {
        state.round = round;
        for (index, inj) in injections.iter().enumerate() {
            if inj.at_round == round {
                state.apply(index, inj, config.seed)?;
            }
        }
        if round == config.rounds {
            break;
        }
        for node in 0..config.node_count {
            state.update(node, ctx, &mut snapshots)?;
            observe(&mut state, ctx);
        }
    }
    Ok(RunOutcome { state, snapshots })
}
