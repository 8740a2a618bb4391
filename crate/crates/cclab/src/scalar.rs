//! Numeric duality: every probabilistic structure in this crate is generic
//! over a [`Scalar`], instantiated either with arbitrary-precision rationals
//! (constructions, oracles, exact identity checks) or with `f64`
//! (solver-produced measures, Monte-Carlo paths).
//!
//! Every `f64` is a dyadic rational, so lifting a float measure into the
//! rational instantiation via [`Scalar::to_exact`] is lossless. The audit
//! uses that lift to verify containment-forced identities with exact
//! equality even on solver output.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Numeric mode of a probability space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rational,
    Float,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Rational => write!(f, "rational"),
            Mode::Float => write!(f, "float"),
        }
    }
}

/// Arithmetic substrate for probability weights.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const MODE: Mode;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero_value(&self) -> bool;

    /// Exact small rational constant.
    fn ratio(num: i64, den: i64) -> Self;

    /// Lossless lift of a finite `f64` (every finite float is dyadic).
    fn lift_f64(x: f64) -> Result<Self>;

    fn to_f64(&self) -> f64;

    /// Lossless conversion into an arbitrary-precision rational.
    fn to_exact(&self) -> BigRational;

    fn abs_value(&self) -> Self;

    /// Cosine of an angle difference given in degrees.
    ///
    /// In float mode this is ordinary `cos`. In rational mode only angle
    /// differences with rational cosine (multiples of 60° or 90°) are
    /// representable; anything else is an input error.
    fn cos_deg(delta_deg: f64) -> Result<Self>;

    /// Normalization test for a total mass: exact equality with 1 in
    /// rational mode, `|total - 1| <= 1e-12` in float mode.
    fn is_normalized(total: &Self) -> bool;
}

impl Scalar for f64 {
    const MODE: Mode = Mode::Float;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn lift_f64(x: f64) -> Result<Self> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::InvalidInput(format!("non-finite weight: {x}")))
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_exact(&self) -> BigRational {
        BigRational::from_float(*self).unwrap_or_else(<BigRational as Zero>::zero)
    }
    fn abs_value(&self) -> Self {
        self.abs()
    }
    fn cos_deg(delta_deg: f64) -> Result<Self> {
        Ok(delta_deg.to_radians().cos())
    }
    fn is_normalized(total: &Self) -> bool {
        (total - 1.0).abs() <= 1e-12
    }
}

/// Rational cosine table for angle differences that have one.
///
/// `delta` must be integral (mod 360) and a multiple of 30 whose cosine is
/// rational (multiples of 60° and 90°).
fn rational_cos_table(delta_deg: f64) -> Option<(i64, i64)> {
    let reduced = delta_deg.rem_euclid(360.0);
    let rounded = reduced.round();
    if (reduced - rounded).abs() > 1e-9 {
        return None;
    }
    match rounded as i64 {
        0 => Some((1, 1)),
        60 => Some((1, 2)),
        90 => Some((0, 1)),
        120 => Some((-1, 2)),
        180 => Some((-1, 1)),
        240 => Some((-1, 2)),
        270 => Some((0, 1)),
        300 => Some((1, 2)),
        _ => None,
    }
}

impl Scalar for BigRational {
    const MODE: Mode = Mode::Rational;

    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as num_traits::One>::one()
    }
    fn is_zero_value(&self) -> bool {
        Zero::is_zero(self)
    }
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn lift_f64(x: f64) -> Result<Self> {
        BigRational::from_float(x)
            .ok_or_else(|| Error::InvalidInput(format!("non-finite weight: {x}")))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn to_exact(&self) -> BigRational {
        self.clone()
    }
    fn abs_value(&self) -> Self {
        Signed::abs(self)
    }
    fn cos_deg(delta_deg: f64) -> Result<Self> {
        rational_cos_table(delta_deg)
            .map(|(n, d)| Self::ratio(n, d))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "cos({delta_deg}°) is not rational; rational mode supports only \
                     angle differences that are multiples of 60° or 90°"
                ))
            })
    }
    fn is_normalized(total: &Self) -> bool {
        *total == Self::one()
    }
}

/// Parse a rational weight from its `"n/d"` (or plain integer) file form.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    text.trim()
        .parse::<BigRational>()
        .map_err(|e| Error::InvalidInput(format!("bad rational literal {text:?}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_cos_covers_exact_angles() {
        for (delta, num, den) in [
            (0.0, 1, 1),
            (60.0, 1, 2),
            (90.0, 0, 1),
            (120.0, -1, 2),
            (180.0, -1, 1),
            (-120.0, -1, 2),
            (300.0, 1, 2),
        ] {
            let got = <BigRational as Scalar>::cos_deg(delta).unwrap();
            assert_eq!(got, BigRational::ratio(num, den), "delta {delta}");
        }
        assert!(<BigRational as Scalar>::cos_deg(45.0).is_err());
        assert!(<BigRational as Scalar>::cos_deg(30.0).is_err());
    }

    #[test]
    fn float_lift_is_lossless() {
        for x in [0.02, 0.375, 1.0 / 3.0, 1e-17] {
            let r = <BigRational as Scalar>::lift_f64(x).unwrap();
            assert_eq!(Scalar::to_f64(&r), x);
        }
    }

    #[test]
    fn parse_rational_accepts_fraction_and_integer() {
        assert_eq!(parse_rational("3/8").unwrap(), BigRational::ratio(3, 8));
        assert_eq!(parse_rational("1").unwrap(), BigRational::ratio(1, 1));
        assert!(parse_rational("x/y").is_err());
    }
}
