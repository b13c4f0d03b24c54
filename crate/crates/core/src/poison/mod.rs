//! Poisoned values and the operator-interception semantics.

mod context;
mod deviation;
mod ops;
mod policy;
mod scalar;

pub use context::{Discard, EvalContext, EventSink, Suppressed};
pub use deviation::{deviate, DeviationModel, Rational, RationalError};
pub use ops::{ArithOp, ArithmeticError, ArithmeticFault, BinOp, CmpOp, Value};
pub use policy::{Effect, Lifetime, PoisonPolicy, PolicyError};
pub use scalar::{injection_rng, Scalar};
