//! Half-integer and extended-real values produced by Gromov products and
//! cross-ratios on graphs with unit edges.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A number in `½ℤ`, stored as twice its value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub fn from_int(v: i64) -> Self {
        HalfInt(2 * v)
    }

    pub fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    /// `½(a + b - c - d)`-style combinations come in through here.
    pub fn half_of(sum: i64) -> Self {
        HalfInt(sum)
    }

    pub fn twice(self) -> i64 {
        self.0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    pub fn floor(self) -> i64 {
        self.0.div_euclid(2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let m = self.0.unsigned_abs();
        let frac = if m.is_multiple_of(2) { "0" } else { "5" };
        write!(f, "{sign}{}.{frac}", m / 2)
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        let twice = (v * 2.0).round();
        if (twice - v * 2.0).abs() > 1e-9 {
            return Err(serde::de::Error::custom(format!("{v} is not a half-integer")));
        }
        Ok(HalfInt(twice as i64))
    }
}

/// Cross-ratio codomain `ℝ ∪ {±∞}` restricted to half-integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtendedValue {
    NegInf,
    Finite(HalfInt),
    PosInf,
}

impl ExtendedValue {
    pub fn finite(self) -> Option<HalfInt> {
        match self {
            ExtendedValue::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    pub fn abs(self) -> ExtendedValue {
        match self {
            ExtendedValue::Finite(v) => ExtendedValue::Finite(v.abs()),
            _ => ExtendedValue::PosInf,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedValue::NegInf => f64::NEG_INFINITY,
            ExtendedValue::Finite(v) => v.to_f64(),
            ExtendedValue::PosInf => f64::INFINITY,
        }
    }
}

impl Neg for ExtendedValue {
    type Output = ExtendedValue;
    fn neg(self) -> ExtendedValue {
        match self {
            ExtendedValue::NegInf => ExtendedValue::PosInf,
            ExtendedValue::Finite(v) => ExtendedValue::Finite(-v),
            ExtendedValue::PosInf => ExtendedValue::NegInf,
        }
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtendedValue::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::NegInf => f.write_str("-inf"),
            ExtendedValue::Finite(v) => v.fmt(f),
            ExtendedValue::PosInf => f.write_str("+inf"),
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_uses_point_zero_and_point_five() {
        assert_eq!(HalfInt::from_twice(5).to_string(), "2.5");
        assert_eq!(HalfInt::from_twice(-3).to_string(), "-1.5");
        assert_eq!(HalfInt::from_int(4).to_string(), "4.0");
        assert_eq!(HalfInt::ZERO.to_string(), "0.0");
    }

    #[test]
    fn infinite_markers_serialize_as_signed_inf() {
        assert_eq!(ExtendedValue::PosInf.to_string(), "+inf");
        assert_eq!(ExtendedValue::NegInf.to_string(), "-inf");
        assert_eq!(-ExtendedValue::PosInf, ExtendedValue::NegInf);
        assert!(ExtendedValue::NegInf < ExtendedValue::Finite(HalfInt::from_int(-100)));
    }

    #[test]
    fn floor_rounds_toward_negative_infinity() {
        assert_eq!(HalfInt::from_twice(5).floor(), 2);
        assert_eq!(HalfInt::from_twice(-3).floor(), -2);
    }
}
