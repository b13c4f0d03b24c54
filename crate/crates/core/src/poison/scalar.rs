use alloc::boxed::Box;
use core::num::NonZeroU32;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::{Effect, Lifetime, PoisonPolicy};

/// Poison state carried by a scalar.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Taint {
    pub(crate) policy: PoisonPolicy,
    /// `Some` iff the lifetime is transient.
    pub(crate) uses_remaining: Option<NonZeroU32>,
    pub(crate) origin_id: u64,
    rng: ChaCha8Rng,
}

impl Taint {
    /// Decides whether this use deviates. Only intermittent policies touch the stream.
    pub(crate) fn draw(&mut self) -> bool {
        match self.policy.effect() {
            Effect::Deterministic => true,
            Effect::Intermittent { rate } => self.rng.random_bool(rate),
        }
    }

    /// Counts one use; returns `false` once the poison has expired.
    pub(crate) fn consume(&mut self) -> bool {
        match self.uses_remaining {
            None => true,
            Some(n) => {
                self.uses_remaining = NonZeroU32::new(n.get() - 1);
                self.uses_remaining.is_some()
            }
        }
    }
}

/// Builds the per-injection random stream: one ChaCha stream per origin under a shared seed.
pub fn injection_rng(seed: u64, origin_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(origin_id);
    rng
}

/// A 64-bit signed integer that may be poisoned.
///
/// `value` is what the program observes and computes with; it already
/// contains every deviation emitted on the way to this scalar. `clean_value`
/// is the shadow computation over clean values only, never corrupted.
/// The two coincide for freshly constructed scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalar {
    value: i64,
    clean_value: i64,
    pub(crate) taint: Option<Box<Taint>>,
}

impl Scalar {
    pub const fn clean(value: i64) -> Self {
        Scalar {
            value,
            clean_value: value,
            taint: None,
        }
    }

    /// Wraps `value` in poison. The deviation stream is derived from `(seed, origin_id)`.
    pub fn poisoned(value: i64, policy: PoisonPolicy, origin_id: u64, seed: u64) -> Self {
        let uses_remaining = match policy.lifetime() {
            Lifetime::Always => None,
            Lifetime::Transient { uses } => Some(uses),
        };
        Scalar {
            value,
            clean_value: value,
            taint: Some(Box::new(Taint {
                policy,
                uses_remaining,
                origin_id,
                rng: injection_rng(seed, origin_id),
            })),
        }
    }

    pub(crate) fn from_parts(value: i64, clean_value: i64, taint: Option<Box<Taint>>) -> Self {
        Scalar {
            value,
            clean_value,
            taint,
        }
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn clean_value(&self) -> i64 {
        self.clean_value
    }

    pub fn is_poisoned(&self) -> bool {
        self.taint.is_some()
    }

    pub fn policy(&self) -> Option<&PoisonPolicy> {
        self.taint.as_ref().map(|t| &t.policy)
    }

    /// Remaining uses of a transient poison; `None` when clean or always-poisoned.
    pub fn uses_remaining(&self) -> Option<u32> {
        self.taint
            .as_ref()
            .and_then(|t| t.uses_remaining)
            .map(NonZeroU32::get)
    }

    pub fn origin_id(&self) -> Option<u64> {
        self.taint.as_ref().map(|t| t.origin_id)
    }

    pub fn clear_poison(&mut self) {
        self.taint = None;
    }
}

impl From<i64> for Scalar {
    fn from(value: i64) -> Self {
        Scalar::clean(value)
    }
}
