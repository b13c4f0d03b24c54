use core::num::NonZeroU32;

use thiserror::Error;

use super::deviation::DeviationModel;

/// Whether a poisoned operand deviates on every use or only sometimes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Effect {
    Deterministic,
    /// Deviates on each use with probability `rate`, strictly inside (0, 1).
    Intermittent {
        rate: f64,
    },
}

impl Effect {
    pub fn intermittent(rate: f64) -> Result<Self, PolicyError> {
        // also rejects NaN
        if rate > 0.0 && rate < 1.0 {
            Ok(Effect::Intermittent { rate })
        } else {
            Err(PolicyError::RateOutOfRange(rate))
        }
    }
}

/// How long a value stays poisoned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lifetime {
    Always,
    /// Cleared after this many unsuppressed uses.
    Transient {
        uses: NonZeroU32,
    },
}

impl Lifetime {
    pub fn transient(uses: u32) -> Result<Self, PolicyError> {
        NonZeroU32::new(uses)
            .map(|uses| Lifetime::Transient { uses })
            .ok_or(PolicyError::ZeroTransientUses)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PolicyError {
    #[error("effect.rate: rate must lie in (0,1), got {0}; use \"deterministic\" for a rate of 1")]
    RateOutOfRange(f64),
    #[error("lifetime.transient: uses must be at least 1")]
    ZeroTransientUses,
    #[error("deviation.magnitude: an offset of 0 never changes a result")]
    ZeroOffset,
    #[error("deviation.magnitude: a scale of 1 never changes a result")]
    UnitScale,
    #[error("deviation.magnitude: bit index {0} is outside 0..64")]
    BitIndexOutOfRange(u32),
}

/// A complete poisoning configuration. Only valid policies can be constructed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoisonPolicy {
    effect: Effect,
    lifetime: Lifetime,
    infectious: bool,
    deviation: DeviationModel,
}

impl PoisonPolicy {
    pub fn new(
        effect: Effect,
        lifetime: Lifetime,
        infectious: bool,
        deviation: DeviationModel,
    ) -> Result<Self, PolicyError> {
        if let Effect::Intermittent { rate } = effect {
            Effect::intermittent(rate)?;
        }
        deviation.validate()?;
        Ok(PoisonPolicy {
            effect,
            lifetime,
            infectious,
            deviation,
        })
    }

    /// Deterministic, always-on poisoning with the given deviation.
    pub fn deterministic(infectious: bool, deviation: DeviationModel) -> Result<Self, PolicyError> {
        Self::new(
            Effect::Deterministic,
            Lifetime::Always,
            infectious,
            deviation,
        )
    }

    pub fn effect(&self) -> Effect {
        self.effect
    }

    pub fn lifetime(&self) -> Lifetime {
        self.lifetime
    }

    pub fn infectious(&self) -> bool {
        self.infectious
    }

    pub fn deviation(&self) -> &DeviationModel {
        &self.deviation
    }

    pub fn with_effect(self, effect: Effect) -> Result<Self, PolicyError> {
        Self::new(effect, self.lifetime, self.infectious, self.deviation)
    }

    pub fn with_lifetime(self, lifetime: Lifetime) -> Self {
        PoisonPolicy { lifetime, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poison::Rational;

    fn offset_one() -> DeviationModel {
        DeviationModel::Offset(Rational::ONE)
    }

    #[test]
    fn rate_bounds() {
        for rate in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            let err = PoisonPolicy::new(
                Effect::Intermittent { rate },
                Lifetime::Always,
                true,
                offset_one(),
            )
            .unwrap_err();
            assert!(matches!(err, PolicyError::RateOutOfRange(_)));
            assert!(err.to_string().contains("rate must lie in (0,1)"));
        }
        assert!(PoisonPolicy::new(
            Effect::Intermittent { rate: 0.25 },
            Lifetime::Always,
            false,
            offset_one()
        )
        .is_ok());
    }

    #[test]
    fn transient_needs_a_use() {
        assert_eq!(Lifetime::transient(0), Err(PolicyError::ZeroTransientUses));
        assert!(Lifetime::transient(1).is_ok());
    }

    #[test]
    fn deviation_is_checked() {
        let err = PoisonPolicy::deterministic(true, DeviationModel::Scale(Rational::ONE));
        assert_eq!(err, Err(PolicyError::UnitScale));
        let err = PoisonPolicy::deterministic(true, DeviationModel::BitFlip(70));
        assert_eq!(err, Err(PolicyError::BitIndexOutOfRange(70)));
    }
}
