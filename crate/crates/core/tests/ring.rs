//! Ring behaviour checked against a plain-integer reference simulation.

use datapoison_core::ring::{run, run_observed};
use datapoison_core::{
    convergence_point_of, token_count, DeviationModel, Discard, EvalContext, Injection,
    PoisonPolicy, Rational, RingConfig, RingState,
};

const GOLDEN: [&str; 7] = [
    "1,0,0,0,0",
    "0,1,0,0,0",
    "0,0,1,0,0",
    "0,0,0,1,0",
    "0,0,0,0,1",
    "1,0,0,0,0",
    "0,1,0,0,0",
];

/// Largest convergence point over all 5^5 initial states with K = 5 and 10
/// rounds, measured with `reference` before the main implementation existed.
const MAX_CONVERGENCE_POINT: usize = 4;

/// The two guarded rules on bare integers.
fn reference(initial: &[i64], k: i64, rounds: u32) -> (Vec<String>, Vec<i64>) {
    let n = initial.len();
    let mut s = initial.to_vec();
    let privileged = |s: &[i64], i: usize| {
        let l = s[(i + n - 1) % n];
        if i == 0 {
            l == s[i]
        } else {
            l != s[i]
        }
    };
    let mut lines = Vec::new();
    for _ in 0..rounds {
        for i in 0..n {
            if privileged(&s, i) {
                let line: Vec<&str> = (0..n)
                    .map(|j| if privileged(&s, j) { "1" } else { "0" })
                    .collect();
                lines.push(line.join(","));
                s[i] = if i == 0 {
                    (s[i] + 1) % k
                } else {
                    s[(i + n - 1) % n]
                };
            }
        }
    }
    (lines, s)
}

fn perturbed(initial: &[i64]) -> Vec<Injection> {
    initial
        .iter()
        .enumerate()
        .map(|(node, &v)| Injection::perturb(node, 0, v))
        .collect()
}

fn lines(out: &datapoison_core::RunOutcome) -> Vec<String> {
    out.snapshots.iter().map(|s| s.line.clone()).collect()
}

#[test]
fn reproduces_golden_prefix() {
    let config = RingConfig::with_default_k(5, 10, 0).unwrap();
    let out = run(&config, &[], &mut EvalContext::new(Discard)).unwrap();
    assert_eq!(out.snapshots.len(), 50);
    assert_eq!(&lines(&out)[..7], GOLDEN);
    assert!(out.snapshots.iter().all(|s| token_count(&s.line) == Ok(1)));
    assert_eq!(out.snapshots[0].firing_node, 0);
    assert_eq!(out.snapshots[5].round, 1);
}

#[test]
fn reference_agrees_on_golden_prefix() {
    let (lines, _) = reference(&[0; 5], 5, 10);
    assert_eq!(lines.len(), 50);
    assert_eq!(&lines[..7], GOLDEN);
}

#[test]
fn exhaustive_convergence_matches_reference() {
    let config = RingConfig::with_default_k(5, 10, 0).unwrap();
    let mut max_point = 0;
    for code in 0..5i64.pow(5) {
        let initial: Vec<i64> = (0..5).map(|d| code / 5i64.pow(d) % 5).collect();
        let out = run(
            &config,
            &perturbed(&initial),
            &mut EvalContext::new(Discard),
        )
        .unwrap();
        let (expected, final_state) = reference(&initial, 5, 10);
        let got = lines(&out);
        assert_eq!(got, expected, "initial {initial:?}");
        assert_eq!(out.state.status_values(), final_state);

        let point = convergence_point_of(got.iter().map(String::as_str))
            .unwrap_or_else(|| panic!("{initial:?} never stabilized"));
        assert_eq!(
            Some(point),
            convergence_point_of(expected.iter().map(String::as_str))
        );
        max_point = max_point.max(point);
    }
    assert_eq!(max_point, MAX_CONVERGENCE_POINT);
}

#[test]
fn perturbed_example_converges() {
    let config = RingConfig::with_default_k(5, 10, 0).unwrap();
    let out = run(
        &config,
        &perturbed(&[3, 1, 4, 1, 2]),
        &mut EvalContext::new(Discard),
    )
    .unwrap();
    let got = lines(&out);
    assert_eq!(got[0], "0,1,1,1,1");
    assert_eq!(
        convergence_point_of(got.iter().map(String::as_str)),
        Some(3)
    );
}

#[test]
fn fairness_after_stabilization() {
    let config = RingConfig::with_default_k(5, 20, 0).unwrap();
    for initial in [[0, 0, 0, 0, 0], [3, 1, 4, 1, 2], [4, 4, 0, 2, 1]] {
        let out = run(
            &config,
            &perturbed(&initial),
            &mut EvalContext::new(Discard),
        )
        .unwrap();
        let start = convergence_point_of(out.snapshots.iter().map(|s| s.line.as_str())).unwrap();
        let first_round = out.snapshots[start].round + 1;
        for window in first_round..=config.rounds() - 5 {
            for node in 0..5 {
                assert!(
                    out.snapshots
                        .iter()
                        .any(|s| s.firing_node == node && (window..window + 5).contains(&s.round)),
                    "node {node} idle in rounds {window}..{}",
                    window + 5
                );
            }
        }
    }
}

#[test]
fn privilege_count_of_hand_examples() {
    let mut ctx = EvalContext::new(Discard);
    let mut state = RingState::from_statuses(&[0, 1, 1, 0, 0], 5).unwrap();
    assert_eq!(token_count(&state.out(&mut ctx)), Ok(3));
}

fn poisoned_injections() -> Vec<Injection> {
    let policy = PoisonPolicy::deterministic(true, DeviationModel::Offset(Rational::ONE)).unwrap();
    vec![Injection::poison(0, 0, policy), Injection::perturb(3, 2, 2)]
}

#[test]
fn monitoring_is_neutral() {
    let config = RingConfig::with_default_k(5, 12, 99).unwrap();
    let injections = poisoned_injections();

    let mut plain_ctx = EvalContext::new(Vec::new());
    let plain = run(&config, &injections, &mut plain_ctx).unwrap();

    let mut watched_ctx = EvalContext::new(Vec::new());
    let mut extra = 0;
    let watched = run_observed(&config, &injections, &mut watched_ctx, |state, ctx| {
        state.out(ctx);
        extra += 1;
    })
    .unwrap();

    assert!(extra > 0);
    assert_eq!(watched.state.status_values(), plain.state.status_values());
    assert_eq!(watched.state.statuses(), plain.state.statuses());
    assert_eq!(watched.snapshots, plain.snapshots);
    assert!(watched_ctx
        .sink()
        .iter()
        .all(|e| !(e.suppressed && e.deviated)));
    let unsuppressed = |events: &[datapoison_core::OperatorEvent]| {
        events
            .iter()
            .filter(|e| !e.suppressed)
            .map(|e| (e.op, e.deviated, e.clean_result, e.emitted_result))
            .collect::<Vec<_>>()
    };
    assert_eq!(
        unsuppressed(watched_ctx.sink()),
        unsuppressed(plain_ctx.sink())
    );
}

#[test]
fn has_privilege_never_deviates() {
    let config = RingConfig::with_default_k(5, 10, 3).unwrap();
    let mut ctx = EvalContext::new(Vec::new());
    run(&config, &poisoned_injections(), &mut ctx).unwrap();
    let suppressed: Vec<_> = ctx.sink().iter().filter(|e| e.suppressed).collect();
    assert!(!suppressed.is_empty());
    assert!(suppressed.iter().all(|e| !e.deviated));
    assert!(suppressed.iter().any(|e| e.lhs_poisoned || e.rhs_poisoned));
}

#[test]
fn poisoned_runs_are_deterministic() {
    let config = RingConfig::with_default_k(5, 10, 5).unwrap();
    let policy = PoisonPolicy::new(
        datapoison_core::Effect::Intermittent { rate: 0.4 },
        datapoison_core::Lifetime::Always,
        true,
        DeviationModel::BitFlip(1),
    )
    .unwrap();
    let injections = [Injection::poison(2, 1, policy)];
    let go = || {
        let mut ctx = EvalContext::new(Vec::new());
        let out = run(&config, &injections, &mut ctx).unwrap();
        (out, ctx.into_sink())
    };
    assert_eq!(go(), go());
}

#[test]
fn deterministic_poison_breaks_the_guard() {
    // node 0's poisoned status negates every comparison it takes part in
    let config = RingConfig::with_default_k(5, 10, 0).unwrap();
    let mut ctx = EvalContext::new(Vec::new());
    let out = run(&config, &poisoned_injections()[..1], &mut ctx).unwrap();
    let stats = datapoison_core::DeviationStats::from_events(ctx.sink());
    assert!(stats.deviations > 0);
    assert_eq!(stats.rate, 1.0);
    // the monitor still reports node 0 as privileged, but node 1 fires instead
    assert_eq!(out.snapshots[0].line, GOLDEN[0]);
    assert_eq!(out.snapshots[0].firing_node, 1);
}
