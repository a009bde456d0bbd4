//! Exact rational constants.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An exact rational constant, always stored in lowest terms with a
/// positive denominator. Integers are rationals with denominator 1.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Number(BigRational);

/// Integer powers are only folded below this exponent magnitude.
const MAX_FOLD_EXPONENT: i64 = 256;

impl Number {
    pub fn integer(value: i64) -> Self {
        Number(BigRational::from_integer(BigInt::from(value)))
    }

    /// Panics if `den` is zero.
    pub fn rational(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Number(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub(crate) fn from_big(num: BigInt, den: BigInt) -> Self {
        Number(BigRational::new(num, den))
    }

    pub fn zero() -> Self {
        Number(BigRational::zero())
    }

    pub fn one() -> Self {
        Number(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Number(self.0.abs())
    }

    /// The value as an `i64` if it is an integer that fits.
    pub fn as_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.0.numer().to_i64()
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact integer power. Returns `None` for `0^negative` or when the
    /// exponent is too large to fold.
    pub fn checked_powi(&self, exp: i64) -> Option<Self> {
        if exp.abs() > MAX_FOLD_EXPONENT {
            return None;
        }
        if self.is_zero() && exp < 0 {
            return None;
        }
        let exp = i32::try_from(exp).ok()?;
        Some(Number(num_traits::Pow::pow(&self.0, exp)))
    }
}

impl std::ops::Add for &Number {
    type Output = Number;
    fn add(self, rhs: &Number) -> Number {
        Number(&self.0 + &rhs.0)
    }
}

impl std::ops::Mul for &Number {
    type Output = Number;
    fn mul(self, rhs: &Number) -> Number {
        Number(&self.0 * &rhs.0)
    }
}

impl std::ops::Neg for &Number {
    type Output = Number;
    fn neg(self) -> Number {
        Number(-&self.0)
    }
}

impl fmt::Debug for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<i64> for Number {
    fn from(v: i64) -> Self {
        Number::integer(v)
    }
}
