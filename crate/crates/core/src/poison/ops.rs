//! Operator interception.
//!
//! Every operation computes two results: the observed one from the operands'
//! observed values, and the shadow one from their clean values. Outside
//! suppression, a poisoned operand makes the operator "use" it: the governing
//! operand (left if poisoned, otherwise right) decides whether the observed
//! result deviates and whether an arithmetic result inherits the poison, and
//! each poisoned operand has one unit of transient lifetime consumed.

use alloc::boxed::Box;

use thiserror::Error;

use super::context::{EvalContext, EventSink};
use super::deviation::deviate;
use super::scalar::{Scalar, Taint};
use crate::trace::{OpKind, OperatorEvent, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    /// Euclidean remainder: never negative for a non-zero divisor.
    Mod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Arith(ArithOp),
    Cmp(CmpOp),
}

impl From<ArithOp> for OpKind {
    fn from(op: ArithOp) -> Self {
        match op {
            ArithOp::Add => OpKind::Add,
            ArithOp::Sub => OpKind::Sub,
            ArithOp::Mul => OpKind::Mul,
            ArithOp::Mod => OpKind::Mod,
        }
    }
}

impl From<CmpOp> for OpKind {
    fn from(op: CmpOp) -> Self {
        match op {
            CmpOp::Eq => OpKind::Eq,
            CmpOp::Ne => OpKind::Neq,
            CmpOp::Lt => OpKind::Lt,
        }
    }
}

/// Result of a generic binary operation.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(Scalar),
    Bool(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ArithmeticFault {
    #[error("integer overflow")]
    Overflow,
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("{fault} in `{op}` at step {step}")]
pub struct ArithmeticError {
    pub step: u64,
    pub op: OpKind,
    pub fault: ArithmeticFault,
}

fn evaluate(op: OpKind, lhs: i64, rhs: Option<i64>) -> Result<Outcome, ArithmeticFault> {
    use ArithmeticFault::*;
    let rhs = || rhs.expect("binary operator without a right operand");
    let int = |v: Option<i64>| v.map(Outcome::Int).ok_or(Overflow);
    match op {
        OpKind::Add => int(lhs.checked_add(rhs())),
        OpKind::Sub => int(lhs.checked_sub(rhs())),
        OpKind::Mul => int(lhs.checked_mul(rhs())),
        OpKind::Mod => match rhs() {
            0 => Err(DivisionByZero),
            d => int(lhs.checked_rem_euclid(d)),
        },
        OpKind::Neg => int(lhs.checked_neg()),
        OpKind::Eq => Ok(Outcome::Bool(lhs == rhs())),
        OpKind::Neq => Ok(Outcome::Bool(lhs != rhs())),
        OpKind::Lt => Ok(Outcome::Bool(lhs < rhs())),
    }
}

fn consume(operand: &mut Scalar) {
    if let Some(taint) = operand.taint.as_mut() {
        if !taint.consume() {
            operand.taint = None;
        }
    }
}

struct Intercepted {
    emitted: Outcome,
    shadow: Outcome,
    infection: Option<Box<Taint>>,
}

impl<S: EventSink> EvalContext<S> {
    fn intercept(
        &mut self,
        op: OpKind,
        lhs: &mut Scalar,
        mut rhs: Option<&mut Scalar>,
    ) -> Result<Intercepted, ArithmeticError> {
        let step = self.take_step();
        let fail = |fault| ArithmeticError { step, op, fault };

        let lhs_value = lhs.value();
        let rhs_value = rhs.as_deref().map(Scalar::value);
        let observed = evaluate(op, lhs_value, rhs_value).map_err(fail)?;
        let shadow = evaluate(
            op,
            lhs.clean_value(),
            rhs.as_deref().map(Scalar::clean_value),
        )
        .map_err(fail)?;

        let lhs_poisoned = lhs.is_poisoned();
        let rhs_poisoned = rhs.as_deref().is_some_and(Scalar::is_poisoned);
        let suppressed = self.is_suppressed();
        let active = !suppressed && (lhs_poisoned || rhs_poisoned);

        let governing = if lhs_poisoned {
            lhs.taint.as_mut()
        } else {
            rhs.as_deref_mut().and_then(|r| r.taint.as_mut())
        };
        let origin_id = governing.as_ref().map(|t| t.origin_id);
        let mut lifetime_after = governing
            .as_ref()
            .and_then(|t| t.uses_remaining)
            .map(|n| u64::from(n.get()));

        let mut emitted = observed;
        let mut deviated = false;
        let mut infection = None;
        if let (true, Some(taint)) = (active, governing) {
            deviated = taint.draw();
            if deviated {
                emitted = match observed {
                    Outcome::Int(v) => {
                        Outcome::Int(deviate(taint.policy.deviation(), v).map_err(fail)?)
                    }
                    Outcome::Bool(b) => Outcome::Bool(!b),
                };
            }
            if taint.policy.infectious() && op.is_arithmetic() {
                // pre-use lifetime, post-draw stream
                infection = Some(taint.clone());
            }
            lifetime_after = lifetime_after.map(|n| n - 1);
        }
        if active {
            consume(lhs);
            if let Some(r) = rhs {
                consume(r);
            }
        }

        self.emit(OperatorEvent {
            step,
            op,
            lhs_clean: lhs_value,
            rhs_clean: rhs_value,
            lhs_poisoned,
            rhs_poisoned,
            deviated,
            clean_result: observed,
            emitted_result: emitted,
            suppressed,
            origin_id,
            lifetime_after,
        });

        Ok(Intercepted {
            emitted,
            shadow,
            infection,
        })
    }

    fn scalar_result(i: Intercepted) -> Scalar {
        match (i.emitted, i.shadow) {
            (Outcome::Int(value), Outcome::Int(clean)) => {
                Scalar::from_parts(value, clean, i.infection)
            }
            _ => unreachable!("arithmetic operator produced a boolean"),
        }
    }

    pub fn arith(
        &mut self,
        op: ArithOp,
        lhs: &mut Scalar,
        rhs: &mut Scalar,
    ) -> Result<Scalar, ArithmeticError> {
        self.intercept(op.into(), lhs, Some(rhs))
            .map(Self::scalar_result)
    }

    /// Comparisons never produce poisoned results; a deviation negates the outcome.
    pub fn compare(
        &mut self,
        op: CmpOp,
        lhs: &mut Scalar,
        rhs: &mut Scalar,
    ) -> Result<bool, ArithmeticError> {
        let i = self.intercept(op.into(), lhs, Some(rhs))?;
        match i.emitted {
            Outcome::Bool(b) => Ok(b),
            Outcome::Int(_) => unreachable!("comparison produced an integer"),
        }
    }

    pub fn binop(
        &mut self,
        op: BinOp,
        lhs: &mut Scalar,
        rhs: &mut Scalar,
    ) -> Result<Value, ArithmeticError> {
        match op {
            BinOp::Arith(op) => self.arith(op, lhs, rhs).map(Value::Scalar),
            BinOp::Cmp(op) => self.compare(op, lhs, rhs).map(Value::Bool),
        }
    }

    pub fn neg(&mut self, operand: &mut Scalar) -> Result<Scalar, ArithmeticError> {
        self.intercept(OpKind::Neg, operand, None)
            .map(Self::scalar_result)
    }

    pub fn add(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<Scalar, ArithmeticError> {
        self.arith(ArithOp::Add, lhs, rhs)
    }

    pub fn sub(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<Scalar, ArithmeticError> {
        self.arith(ArithOp::Sub, lhs, rhs)
    }

    pub fn mul(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<Scalar, ArithmeticError> {
        self.arith(ArithOp::Mul, lhs, rhs)
    }

    pub fn rem(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<Scalar, ArithmeticError> {
        self.arith(ArithOp::Mod, lhs, rhs)
    }

    pub fn eq(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<bool, ArithmeticError> {
        self.compare(CmpOp::Eq, lhs, rhs)
    }

    pub fn ne(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<bool, ArithmeticError> {
        self.compare(CmpOp::Ne, lhs, rhs)
    }

    pub fn lt(&mut self, lhs: &mut Scalar, rhs: &mut Scalar) -> Result<bool, ArithmeticError> {
        self.compare(CmpOp::Lt, lhs, rhs)
    }
}
