//! Scenario files: one JSON document describing a ring, its injections and a seed.
//!
//! ```json
//! {
//!   "ring": { "node_count": 5, "k_states": 5, "rounds": 10 },
//!   "seed": 42,
//!   "injections": [
//!     { "node": 0, "at_round": 0,
//!       "kind": { "poison": {
//!         "effect": "deterministic",
//!         "lifetime": { "transient": 3 },
//!         "infectious": true,
//!         "deviation": { "kind": "offset", "magnitude": 1 } } } },
//!     { "node": 2, "at_round": 4, "kind": { "perturb": { "new_status": 3 } } }
//!   ],
//!   "trace_path": "run.jsonl"
//! }
//! ```
//!
//! Field names are canonical; unknown fields are rejected. Values are
//! validated while parsing so that errors point at the offending line.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use datapoison_core::ring::validate_injections;
use datapoison_core::{
    DeviationModel, Effect, Injection, InjectionKind, Lifetime, PoisonPolicy, Rational, RingConfig,
    RingError,
};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", DisplayInvalid(self))]
    Invalid {
        path: Option<PathBuf>,
        line: usize,
        column: usize,
        /// Dotted location of the offending value; empty for the document root.
        field: String,
        message: String,
    },
}

struct DisplayInvalid<'a>(&'a ScenarioError);

impl fmt::Display for DisplayInvalid<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ScenarioError::Invalid {
            path,
            line,
            column,
            field,
            message,
        } = self.0
        else {
            unreachable!()
        };
        match path {
            Some(p) => write!(f, "{}:{line}:{column}: ", p.display())?,
            None => write!(f, "line {line}, column {column}: ")?,
        }
        if !field.is_empty() {
            write!(f, "in `{field}`: ")?;
        }
        f.write_str(message)
    }
}

/// Whole-document schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub ring: RingSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub injections: Vec<InjectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRing")]
pub struct RingSpec {
    pub node_count: usize,
    /// Defaults to `node_count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_states: Option<i64>,
    pub rounds: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRing {
    node_count: usize,
    #[serde(default)]
    k_states: Option<i64>,
    rounds: u32,
}

impl RingSpec {
    pub fn config(&self, seed: u64) -> Result<RingConfig, RingError> {
        let k_states = match self.k_states {
            Some(k) => k,
            None => i64::try_from(self.node_count).map_err(|_| RingError::NoNodes)?,
        };
        RingConfig::new(self.node_count, k_states, self.rounds, seed)
    }
}

impl TryFrom<RawRing> for RingSpec {
    type Error = RingError;

    fn try_from(raw: RawRing) -> Result<Self, Self::Error> {
        let spec = RingSpec {
            node_count: raw.node_count,
            k_states: raw.k_states,
            rounds: raw.rounds,
        };
        spec.config(0).map(|_| spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    pub node: usize,
    #[serde(default)]
    pub at_round: u32,
    pub kind: InjectionKindSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InjectionKindSpec {
    Poison(PolicySpec),
    Perturb { new_status: i64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub effect: EffectSpec,
    pub lifetime: LifetimeSpec,
    pub infectious: bool,
    pub deviation: DeviationSpec,
}

impl PolicySpec {
    pub fn policy(&self) -> PoisonPolicy {
        let effect = match self.effect {
            EffectSpec::Deterministic => Effect::Deterministic,
            EffectSpec::Intermittent(Rate(rate)) => Effect::Intermittent { rate },
        };
        let lifetime = match self.lifetime {
            LifetimeSpec::Always => Lifetime::Always,
            LifetimeSpec::Transient(TransientUses(n)) => {
                Lifetime::transient(n).expect("validated while parsing")
            }
        };
        PoisonPolicy::new(effect, lifetime, self.infectious, self.deviation.model())
            .expect("validated while parsing")
    }
}

/// `"deterministic"` or `{"intermittent": rate}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSpec {
    Deterministic,
    Intermittent(Rate),
}

/// A probability strictly inside (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Rate(f64);

impl Rate {
    pub fn new(rate: f64) -> Result<Self, datapoison_core::PolicyError> {
        Effect::intermittent(rate).map(|_| Rate(rate))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Rate::new(f64::deserialize(d)?).map_err(de::Error::custom)
    }
}

/// `"always"` or `{"transient": uses}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifetimeSpec {
    Always,
    Transient(TransientUses),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TransientUses(u32);

impl TransientUses {
    pub fn new(uses: u32) -> Result<Self, datapoison_core::PolicyError> {
        Lifetime::transient(uses).map(|_| TransientUses(uses))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl<'de> Deserialize<'de> for TransientUses {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        TransientUses::new(u32::deserialize(d)?).map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    Offset,
    Scale,
    StuckAt,
    Bitflip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDeviation")]
pub struct DeviationSpec {
    pub kind: DeviationKind,
    pub magnitude: Magnitude,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeviation {
    kind: DeviationKind,
    magnitude: Magnitude,
}

impl DeviationSpec {
    fn try_model(&self) -> Result<DeviationModel, String> {
        let m = self.magnitude.0;
        let integer = || {
            m.is_integer().then_some(m.numer()).ok_or_else(|| {
                format!(
                    "deviation.magnitude: {:?} needs an integer, got {m}",
                    self.kind
                )
            })
        };
        let model = match self.kind {
            DeviationKind::Offset => DeviationModel::offset(m),
            DeviationKind::Scale => DeviationModel::scale(m),
            DeviationKind::StuckAt => Ok(DeviationModel::stuck_at(integer()?)),
            DeviationKind::Bitflip => {
                let bit = integer()?;
                let bit = u32::try_from(bit).unwrap_or(u32::MAX);
                DeviationModel::bitflip(bit)
            }
        };
        model.map_err(|e| e.to_string())
    }

    pub fn model(&self) -> DeviationModel {
        self.try_model().expect("validated while parsing")
    }
}

impl TryFrom<RawDeviation> for DeviationSpec {
    type Error = String;

    fn try_from(raw: RawDeviation) -> Result<Self, Self::Error> {
        let spec = DeviationSpec {
            kind: raw.kind,
            magnitude: raw.magnitude,
        };
        spec.try_model().map(|_| spec)
    }
}

/// An exact magnitude: a JSON integer, a decimal such as `1.01`, or a
/// string such as `"101/100"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Magnitude(pub Rational);

impl Serialize for Magnitude {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.numer())
        } else {
            s.collect_str(&self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Magnitude {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct MagnitudeVisitor;

        impl Visitor<'_> for MagnitudeVisitor {
            type Value = Magnitude;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a fraction string such as \"101/100\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Magnitude, E> {
                Ok(Magnitude(Rational::integer(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Magnitude, E> {
                i64::try_from(v)
                    .map(|v| Magnitude(Rational::integer(v)))
                    .map_err(|_| E::custom("magnitude does not fit a 64-bit integer"))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Magnitude, E> {
                if !v.is_finite() {
                    return Err(E::custom("magnitude must be finite"));
                }
                // shortest round-trip decimal, so 1.01 parses as 101/100
                self.visit_str(&v.to_string())
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Magnitude, E> {
                Rational::parse(v).map(Magnitude).map_err(E::custom)
            }
        }

        d.deserialize_any(MagnitudeVisitor)
    }
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub ring: RingConfig,
    pub injections: Vec<Injection>,
    pub seed: u64,
    pub trace_path: Option<PathBuf>,
    spec: ScenarioSpec,
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self, RingError> {
        let ring = spec.ring.config(spec.seed)?;
        let injections: Vec<Injection> = spec
            .injections
            .iter()
            .map(|inj| Injection {
                node: inj.node,
                at_round: inj.at_round,
                kind: match &inj.kind {
                    InjectionKindSpec::Poison(p) => InjectionKind::Poison(p.policy()),
                    InjectionKindSpec::Perturb { new_status } => InjectionKind::Perturb {
                        new_status: *new_status,
                    },
                },
            })
            .collect();
        validate_injections(&ring, &injections)?;
        Ok(Scenario {
            ring,
            injections,
            seed: spec.seed,
            trace_path: spec.trace_path.clone(),
            spec,
        })
    }

    /// Five nodes, K = 5, ten rounds, no faults.
    pub fn fault_free_reference() -> Self {
        Scenario::from_spec(ScenarioSpec {
            ring: RingSpec {
                node_count: 5,
                k_states: Some(5),
                rounds: 10,
            },
            seed: 0,
            injections: Vec::new(),
            trace_path: None,
        })
        .expect("reference scenario is valid")
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.spec.seed = seed;
        self.ring = self.ring.with_seed(seed);
        self
    }

    /// SHA-256 over the canonical JSON of the ring and injections.
    /// The seed and trace path are not part of the digest.
    pub fn digest(&self) -> String {
        let canonical = ScenarioSpec {
            seed: 0,
            trace_path: None,
            ..self.spec.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("scenario serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }
}

/// Deserializes a spec and checks the cross-field constraints in one pass,
/// so that every failure carries a position.
struct Checked(Scenario);

impl<'de> Deserialize<'de> for Checked {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let spec = ScenarioSpec::deserialize(d)?;
        Scenario::from_spec(spec)
            .map(Checked)
            .map_err(de::Error::custom)
    }
}

fn invalid(field: String, inner: serde_json::Error) -> ScenarioError {
    let mut message = inner.to_string();
    if let Some(at) = message.rfind(" at line ") {
        message.truncate(at);
    }
    ScenarioError::Invalid {
        path: None,
        line: inner.line(),
        column: inner.column(),
        field: if field == "." { String::new() } else { field },
        message,
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let Checked(scenario) = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let field = err.path().to_string();
        invalid(field, err.into_inner())
    })?;
    de.end().map_err(|e| invalid(String::new(), e))?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario(&text).map_err(|err| match err {
        ScenarioError::Invalid {
            line,
            column,
            field,
            message,
            ..
        } => ScenarioError::Invalid {
            path: Some(path.to_owned()),
            line,
            column,
            field,
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"{"ring": {"node_count": 5, "k_states": 5, "rounds": 10}}"#;

    fn invalid(text: &str) -> (usize, String, String) {
        match parse_scenario(text).unwrap_err() {
            ScenarioError::Invalid {
                line,
                field,
                message,
                ..
            } => (line, field, message),
            other => panic!("unexpected {other}"),
        }
    }

    fn poison_doc(policy: &str) -> String {
        format!(
            r#"{{
  "ring": {{"node_count": 5, "rounds": 10}},
  "injections": [
    {{"node": 0, "kind": {{"poison": {policy}}}}}
  ]
}}"#
        )
    }

    #[test]
    fn reference_document() {
        let s = parse_scenario(REFERENCE).unwrap();
        assert_eq!(s.ring.node_count(), 5);
        assert_eq!(s.ring.k_states(), 5);
        assert_eq!(s.ring.rounds(), 10);
        assert!(s.injections.is_empty());
        assert_eq!(s, Scenario::fault_free_reference());
    }

    #[test]
    fn k_must_exceed_n() {
        let (line, field, message) =
            invalid(r#"{"ring": {"node_count": 5, "k_states": 4, "rounds": 10}}"#);
        assert_eq!(line, 1);
        assert_eq!(field, "ring");
        assert!(message.contains("K must exceed N"), "{message}");
    }

    #[test]
    fn full_policy() {
        let s = parse_scenario(&poison_doc(
            r#"{"effect": {"intermittent": 0.25}, "lifetime": {"transient": 3},
                "infectious": false, "deviation": {"kind": "scale", "magnitude": 1.01}}"#,
        ))
        .unwrap();
        let InjectionKind::Poison(p) = s.injections[0].kind else {
            panic!()
        };
        assert_eq!(p.effect(), Effect::Intermittent { rate: 0.25 });
        assert_eq!(p.lifetime(), Lifetime::transient(3).unwrap());
        assert!(!p.infectious());
        assert_eq!(
            *p.deviation(),
            DeviationModel::Scale(Rational::new(101, 100).unwrap())
        );
    }

    #[test]
    fn rate_of_one_points_to_deterministic() {
        let (line, field, message) = invalid(&poison_doc(
            r#"{"effect": {"intermittent": 1.0}, "lifetime": "always",
                "infectious": true, "deviation": {"kind": "offset", "magnitude": 1}}"#,
        ));
        assert_eq!(line, 4);
        assert_eq!(field, "injections[0].kind.poison.effect.intermittent");
        assert!(message.contains("deterministic"), "{message}");
    }

    #[test]
    fn aliases_are_rejected() {
        let (_, field, message) = invalid(&poison_doc(
            r#"{"effect": "deterministic", "lifetime": "always", "cascade": true,
                "infectious": true, "deviation": {"kind": "offset", "magnitude": 1}}"#,
        ));
        assert_eq!(field, "injections[0].kind.poison.cascade");
        assert!(message.contains("unknown field"), "{message}");
    }

    #[test]
    fn deviation_checks() {
        let doc = |dev: &str| {
            poison_doc(&format!(
                r#"{{"effect": "deterministic", "lifetime": "always", "infectious": true, "deviation": {dev}}}"#
            ))
        };
        let (_, field, message) = invalid(&doc(r#"{"kind": "offset", "magnitude": 0}"#));
        assert_eq!(field, "injections[0].kind.poison.deviation");
        assert!(message.contains("offset of 0"));
        assert!(invalid(&doc(r#"{"kind": "scale", "magnitude": "2/2"}"#))
            .2
            .contains("scale of 1"));
        assert!(invalid(&doc(r#"{"kind": "bitflip", "magnitude": 64}"#))
            .2
            .contains("bit index"));
        assert!(invalid(&doc(r#"{"kind": "stuck_at", "magnitude": 0.5}"#))
            .2
            .contains("needs an integer"));
        assert!(parse_scenario(&doc(r#"{"kind": "stuck_at", "magnitude": -3}"#)).is_ok());
    }

    #[test]
    fn cross_field_errors_name_the_injection() {
        let (_, field, message) = invalid(
            r#"{"ring": {"node_count": 3, "rounds": 2},
                "injections": [{"node": 3, "kind": {"perturb": {"new_status": 0}}}]}"#,
        );
        assert_eq!(field, "");
        assert!(message.starts_with("injections[0].node"), "{message}");
        let (_, _, message) = invalid(
            r#"{"ring": {"node_count": 3, "rounds": 2},
                "injections": [{"node": 1, "kind": {"perturb": {"new_status": 3}}}]}"#,
        );
        assert!(message.contains("outside [0, 3)"), "{message}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let (line, _, _) = invalid("{\n  \"ring\": {\n    \"node_count\": 5,,\n}");
        assert_eq!(line, 3);
        assert!(parse_scenario(&format!("{REFERENCE} trailing")).is_err());
    }

    #[test]
    fn digest_ignores_seed_and_trace_path() {
        let a = parse_scenario(REFERENCE).unwrap();
        let b = a.clone().with_seed(99);
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let c =
            parse_scenario(r#"{"ring": {"node_count": 5, "k_states": 6, "rounds": 10}}"#).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn spec_serializes_back() {
        let text = poison_doc(
            r#"{"effect": {"intermittent": 0.5}, "lifetime": {"transient": 2},
                "infectious": true, "deviation": {"kind": "scale", "magnitude": "3/2"}}"#,
        );
        let s = parse_scenario(&text).unwrap();
        let again = parse_scenario(&serde_json::to_string(s.spec()).unwrap()).unwrap();
        assert_eq!(again, s);
    }
}
