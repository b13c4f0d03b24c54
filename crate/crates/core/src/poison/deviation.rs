use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use super::ops::ArithmeticFault;
use super::policy::PolicyError;

/// An exact fraction with a positive denominator, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    numer: i64,
    denom: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RationalError {
    #[error("empty number")]
    Empty,
    #[error("invalid number {0:?}")]
    Invalid(alloc::string::String),
    #[error("denominator must be non-zero")]
    ZeroDenominator,
    #[error("number does not fit a 64-bit fraction")]
    TooLarge,
}

impl Rational {
    pub const ZERO: Rational = Rational { numer: 0, denom: 1 };
    pub const ONE: Rational = Rational { numer: 1, denom: 1 };

    pub fn new(numer: i64, denom: i64) -> Result<Self, RationalError> {
        if denom == 0 {
            return Err(RationalError::ZeroDenominator);
        }
        Self::reduce(i128::from(numer), i128::from(denom))
    }

    pub const fn integer(value: i64) -> Self {
        Rational {
            numer: value,
            denom: 1,
        }
    }

    pub fn numer(&self) -> i64 {
        self.numer
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn is_integer(&self) -> bool {
        self.denom == 1
    }

    fn reduce(mut numer: i128, mut denom: i128) -> Result<Self, RationalError> {
        if denom < 0 {
            numer = -numer;
            denom = -denom;
        }
        let g = gcd(numer.unsigned_abs(), denom.unsigned_abs()).max(1) as i128;
        let numer = i64::try_from(numer / g).map_err(|_| RationalError::TooLarge)?;
        let denom = i64::try_from(denom / g).map_err(|_| RationalError::TooLarge)?;
        Ok(Rational { numer, denom })
    }

    /// Parses `"3"`, `"-0.25"`, `"1.01"` or `"101/100"` exactly.
    pub fn parse(text: &str) -> Result<Self, RationalError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(RationalError::Empty);
        }
        let invalid = || RationalError::Invalid(text.into());
        if let Some((n, d)) = text.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| invalid())?;
            let d: i64 = d.trim().parse().map_err(|_| invalid())?;
            return Self::new(n, d);
        }

        let (negative, digits) = match text.as_bytes()[0] {
            b'-' => (true, &text[1..]),
            b'+' => (false, &text[1..]),
            _ => (false, text),
        };
        let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(invalid());
        }
        let mut numer: i128 = 0;
        let mut denom: i128 = 1;
        for (i, c) in whole.chars().chain(frac.chars()).enumerate() {
            let digit = c.to_digit(10).ok_or_else(invalid)?;
            numer = numer
                .checked_mul(10)
                .and_then(|n| n.checked_add(i128::from(digit)))
                .ok_or(RationalError::TooLarge)?;
            if i >= whole.len() {
                denom = denom.checked_mul(10).ok_or(RationalError::TooLarge)?;
            }
        }
        if negative {
            numer = -numer;
        }
        Self::reduce(numer, denom)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational::parse(s)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom == 1 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, self.denom)
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `numer / denom` rounded to the nearest integer, ties to even. `denom > 0`.
fn round_half_even(numer: i128, denom: i128) -> i128 {
    let q = numer.div_euclid(denom);
    let r = numer.rem_euclid(denom);
    match (2 * r).cmp(&denom) {
        core::cmp::Ordering::Less => q,
        core::cmp::Ordering::Greater => q + 1,
        core::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// How a deviating operator corrupts an integer result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviationModel {
    /// `result + magnitude`, rounded half-to-even when the magnitude is fractional.
    Offset(Rational),
    /// `result * magnitude`, rounded half-to-even.
    Scale(Rational),
    /// The result is replaced by a constant.
    StuckAt(i64),
    /// The indexed bit (0 = least significant) of the two's complement result is toggled.
    BitFlip(u32),
}

impl DeviationModel {
    pub fn offset(magnitude: Rational) -> Result<Self, PolicyError> {
        let model = DeviationModel::Offset(magnitude);
        model.validate().map(|()| model)
    }

    pub fn scale(magnitude: Rational) -> Result<Self, PolicyError> {
        let model = DeviationModel::Scale(magnitude);
        model.validate().map(|()| model)
    }

    pub fn stuck_at(value: i64) -> Self {
        DeviationModel::StuckAt(value)
    }

    pub fn bitflip(bit: u32) -> Result<Self, PolicyError> {
        let model = DeviationModel::BitFlip(bit);
        model.validate().map(|()| model)
    }

    /// Rejects models that can never change a result.
    pub fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            DeviationModel::Offset(m) if m == Rational::ZERO => Err(PolicyError::ZeroOffset),
            DeviationModel::Scale(m) if m == Rational::ONE => Err(PolicyError::UnitScale),
            DeviationModel::BitFlip(bit) if bit >= i64::BITS => {
                Err(PolicyError::BitIndexOutOfRange(bit))
            }
            _ => Ok(()),
        }
    }
}

/// Applies `model` to a clean integer result.
pub fn deviate(model: &DeviationModel, clean: i64) -> Result<i64, ArithmeticFault> {
    let narrow = |v: i128| i64::try_from(v).map_err(|_| ArithmeticFault::Overflow);
    match *model {
        DeviationModel::Offset(m) => {
            let numer = i128::from(clean) * i128::from(m.denom) + i128::from(m.numer);
            narrow(round_half_even(numer, i128::from(m.denom)))
        }
        DeviationModel::Scale(m) => {
            let numer = i128::from(clean) * i128::from(m.numer);
            narrow(round_half_even(numer, i128::from(m.denom)))
        }
        DeviationModel::StuckAt(value) => Ok(value),
        DeviationModel::BitFlip(bit) => 1i64
            .checked_shl(bit)
            .map(|mask| clean ^ mask)
            .ok_or(ArithmeticFault::Overflow),
    }
}
