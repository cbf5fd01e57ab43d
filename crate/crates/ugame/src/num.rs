//! Exact rational scalars and the `Value` type shared by every solver.
//!
//! All game data, LP tableaux and solution sets are kept in arbitrary
//! precision rationals so that verdicts ("is the optimum exactly v(N)?",
//! "are these two probe values equal?") are decided by exact comparison.
//! Only the general, non-affine utility mode degrades to `f64` with
//! explicit tolerances, and results derived from it are flagged as
//! approximate at the API level.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary precision rational, always kept in lowest terms with a
/// positive denominator (guaranteed by `num_rational`).
pub type Rational = BigRational;

/// Rational from an integer.
pub fn rat(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Rational `num/den`. Panics on a zero denominator; intended for literals
/// in code and tests, not for parsing user input (see [`parse_rational`]).
pub fn ratio(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse a rational written as `p`, `p/q` or a decimal such as `-1.25`.
///
/// Unlike `BigRational::from_str` this rejects a zero denominator with a
/// proper error instead of panicking, which matters for untrusted input.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::MalformedRational(text.to_string()));
    }
    let bad = || Error::MalformedRational(text.to_string());
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::MalformedRational(text.to_string()));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        // Decimal notation: sign belongs to the whole part.
        let negative = whole.trim_start().starts_with('-');
        let whole: BigInt = if whole == "-" || whole.is_empty() {
            BigInt::zero()
        } else {
            whole.trim().parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let magnitude = whole.abs() * &scale + digits;
        let signed = if negative { -magnitude } else { magnitude };
        return Ok(BigRational::new(signed, scale));
    }
    let num: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(num))
}

/// Canonical text form: `p` when the denominator is one, `p/q` otherwise.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Best-effort conversion to `f64` (used only by the general utility mode
/// and human-readable summaries).
pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational from a finite `f64`. Every finite double is a dyadic
/// rational, so this is lossless.
pub fn from_f64(x: f64) -> Result<Rational> {
    BigRational::from_float(x).ok_or(Error::NonFiniteFloat(x))
}

/// A scalar that is exact in affine utility mode and approximate in
/// general mode. Exactness is part of the value, not a global flag, so
/// downstream code cannot silently mix the two regimes.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(Rational),
    Approx(f64),
}

impl Value {
    pub fn exact(r: Rational) -> Self {
        Value::Exact(r)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => to_f64(r),
            Value::Approx(x) => *x,
        }
    }

    /// The exact rational, if this value came from the affine pipeline.
    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{r}"),
            Value::Approx(x) => write!(f, "~{x}"),
        }
    }
}
