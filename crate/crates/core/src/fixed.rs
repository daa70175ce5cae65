//! Q8.12 fixed-point arithmetic with saturating shift-add constant
//! multiplication.
//!
//! A [`FixedPoint`] holds a 20-bit two's complement raw value (1 sign bit,
//! 7 integer bits, 12 fraction bits). Every operation saturates instead of
//! wrapping and reports whether it did. Shifts truncate toward −∞ like a
//! hardware arithmetic shifter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAC_BITS: u32 = 12;
pub const WORD_BITS: u32 = 20;

/// Right shift equivalent to multiplying by `dt = 1 / (16 · 1024)`.
pub const DT_SHIFT: u32 = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixedError {
    #[error("{value} needs {needed} signed power-of-two terms, limit is {max_terms}")]
    NotRepresentable {
        value: f64,
        needed: usize,
        max_terms: usize,
    },
    #[error("{0} is not a dyadic rational")]
    NotDyadic(f64),
    #[error("invalid fixed-point configuration: {0}")]
    InvalidFormat(String),
}

/// Word layout: total bits including the sign bit, and fraction bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QFormat {
    pub word_bits: u32,
    pub frac_bits: u32,
}

impl Default for QFormat {
    fn default() -> Self {
        QFormat::Q8_12
    }
}

impl QFormat {
    /// 1 sign + 7 integer + 12 fraction bits.
    pub const Q8_12: QFormat = QFormat {
        word_bits: WORD_BITS,
        frac_bits: FRAC_BITS,
    };

    /// 1 sign + 8 integer + 12 fraction bits, for experiments only.
    pub const Q8_12_SIGNED: QFormat = QFormat {
        word_bits: 21,
        frac_bits: FRAC_BITS,
    };

    pub fn validate(&self) -> Result<(), FixedError> {
        if self.frac_bits != FRAC_BITS || !(self.frac_bits + 2..=31).contains(&self.word_bits) {
            return Err(FixedError::InvalidFormat(format!(
                "word {} / fraction {} bits unsupported",
                self.word_bits, self.frac_bits
            )));
        }
        Ok(())
    }

    pub fn raw_max(&self) -> i64 {
        (1i64 << (self.word_bits - 1)) - 1
    }

    pub fn raw_min(&self) -> i64 {
        -(1i64 << (self.word_bits - 1))
    }

    /// Narrows a wide raw value, returning the saturation flag.
    #[inline]
    pub fn narrow(&self, wide: i64) -> (FixedPoint, bool) {
        if wide > self.raw_max() {
            (
                FixedPoint {
                    raw: self.raw_max() as i32,
                },
                true,
            )
        } else if wide < self.raw_min() {
            (
                FixedPoint {
                    raw: self.raw_min() as i32,
                },
                true,
            )
        } else {
            (FixedPoint { raw: wide as i32 }, false)
        }
    }

    /// Round-half-even encoding of `x`; NaN encodes as zero and is flagged.
    pub fn encode(&self, x: f64) -> (FixedPoint, bool) {
        if x.is_nan() {
            return (FixedPoint::ZERO, true);
        }
        let scaled = (x * (1u64 << self.frac_bits) as f64).round_ties_even();
        if scaled > self.raw_max() as f64 {
            (
                FixedPoint {
                    raw: self.raw_max() as i32,
                },
                true,
            )
        } else if scaled < self.raw_min() as f64 {
            (
                FixedPoint {
                    raw: self.raw_min() as i32,
                },
                true,
            )
        } else {
            (FixedPoint { raw: scaled as i32 }, false)
        }
    }

    #[inline]
    pub fn add(&self, a: FixedPoint, b: FixedPoint) -> (FixedPoint, bool) {
        self.narrow(a.raw as i64 + b.raw as i64)
    }

    #[inline]
    pub fn sub(&self, a: FixedPoint, b: FixedPoint) -> (FixedPoint, bool) {
        self.narrow(a.raw as i64 - b.raw as i64)
    }

    #[inline]
    pub fn neg(&self, a: FixedPoint) -> (FixedPoint, bool) {
        self.narrow(-(a.raw as i64))
    }

    #[inline]
    pub fn abs(&self, a: FixedPoint) -> (FixedPoint, bool) {
        self.narrow((a.raw as i64).abs())
    }

    /// Arithmetic right shift (floor).
    #[inline]
    pub fn shr(&self, a: FixedPoint, s: u32) -> FixedPoint {
        FixedPoint {
            raw: a.raw >> s.min(31),
        }
    }

    #[inline]
    pub fn shl(&self, a: FixedPoint, s: u32) -> (FixedPoint, bool) {
        self.narrow((a.raw as i64) << s.min(40))
    }

    /// `floor(a · b)` of two fixed-point values: a general multiplier.
    #[inline]
    pub fn mul(&self, a: FixedPoint, b: FixedPoint) -> (FixedPoint, bool) {
        self.narrow((a.raw as i64 * b.raw as i64) >> self.frac_bits)
    }

    /// Shift-add product, see [`mul_by_plan`].
    pub fn mul_plan(&self, x: FixedPoint, plan: &ShiftAddPlan) -> (FixedPoint, bool) {
        let guard = plan.guard_bits();
        let mut acc: i128 = 0;
        for t in &plan.terms {
            let shifted = (x.raw as i128) << (guard as i32 + t.shift) as u32;
            acc += t.sign as i128 * shifted;
        }
        let wide = acc >> guard;
        let clamped = wide.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
        self.narrow(clamped)
    }
}

/// A Q8.12 value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedPoint {
    raw: i32,
}

impl FixedPoint {
    pub const ZERO: FixedPoint = FixedPoint { raw: 0 };
    pub const MAX: FixedPoint = FixedPoint { raw: (1 << 19) - 1 };
    pub const MIN: FixedPoint = FixedPoint { raw: -(1 << 19) };

    /// Wraps a raw value, saturating it into the 20-bit range.
    pub fn from_raw(raw: i64) -> (FixedPoint, bool) {
        QFormat::Q8_12.narrow(raw)
    }

    pub const fn raw(self) -> i32 {
        self.raw
    }

    /// Round-half-even encoding, returning the saturation flag.
    pub fn encode(x: f64) -> (FixedPoint, bool) {
        QFormat::Q8_12.encode(x)
    }

    /// [`FixedPoint::encode`] without the flag.
    pub fn from_f64(x: f64) -> FixedPoint {
        Self::encode(x).0
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / (1u32 << FRAC_BITS) as f64
    }

    pub fn sat_add(self, rhs: FixedPoint) -> (FixedPoint, bool) {
        QFormat::Q8_12.add(self, rhs)
    }

    pub fn sat_sub(self, rhs: FixedPoint) -> (FixedPoint, bool) {
        QFormat::Q8_12.sub(self, rhs)
    }

    pub fn sat_neg(self) -> (FixedPoint, bool) {
        QFormat::Q8_12.neg(self)
    }

    pub fn sat_abs(self) -> (FixedPoint, bool) {
        QFormat::Q8_12.abs(self)
    }
}

impl std::fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// `sign · 2^shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub sign: i8,
    pub shift: i32,
}

/// A constant written as `Σ sign · 2^shift`, shifts strictly decreasing.
///
/// The zero constant is the only plan with no terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ShiftAddPlan {
    pub terms: Vec<Term>,
}

impl ShiftAddPlan {
    pub fn zero() -> Self {
        ShiftAddPlan { terms: Vec::new() }
    }

    /// Builds a plan from explicit terms, sorting them into canonical order.
    pub fn from_terms(mut terms: Vec<Term>) -> Result<Self, FixedError> {
        terms.sort_by_key(|t| std::cmp::Reverse(t.shift));
        if terms.windows(2).any(|w| w[0].shift == w[1].shift) || terms.iter().any(|t| t.sign.abs() != 1) {
            return Err(FixedError::InvalidFormat(
                "plan terms need unique shifts and ±1 signs".into(),
            ));
        }
        Ok(ShiftAddPlan { terms })
    }

    pub fn value(&self) -> f64 {
        self.terms.iter().map(|t| t.sign as f64 * 2f64.powi(t.shift)).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Extra low-order bits that keep every term exact before the final shift.
    fn guard_bits(&self) -> u32 {
        self.terms.iter().map(|t| (-t.shift).max(0) as u32).max().unwrap_or(0)
    }

    /// Adders needed to combine the terms.
    pub fn adder_count(&self) -> usize {
        self.terms.len().saturating_sub(1)
    }
}

impl std::fmt::Display for ShiftAddPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let sign = if t.sign < 0 {
                "-"
            } else if i > 0 {
                "+"
            } else {
                ""
            };
            write!(f, "{sign}2^{}", t.shift)?;
        }
        Ok(())
    }
}

/// Splits a dyadic `c` into `m · 2^-f` with odd `m` (or `m = 0`).
fn dyadic_parts(c: f64) -> Result<(i64, i32), FixedError> {
    if !c.is_finite() {
        return Err(FixedError::NotDyadic(c));
    }
    if c == 0.0 {
        return Ok((0, 0));
    }
    let mut f = 0i32;
    let mut scaled = c;
    while scaled.fract() != 0.0 {
        scaled *= 2.0;
        f += 1;
        if f > 60 {
            return Err(FixedError::NotDyadic(c));
        }
    }
    while scaled.abs() >= 2f64.powi(62) {
        scaled /= 2.0;
        f -= 1;
    }
    Ok((scaled as i64, f))
}

/// Non-adjacent form of `m`: `(digit, bit)` pairs, low bit first.
fn naf_digits(mut m: i64) -> Vec<(i8, i32)> {
    let mut out = Vec::new();
    let mut bit = 0;
    while m != 0 {
        if m & 1 != 0 {
            let d: i64 = 2 - m.rem_euclid(4);
            out.push((d as i8, bit));
            m -= d;
        }
        m >>= 1;
        bit += 1;
    }
    out
}

fn binary_digits(m: i64) -> Vec<(i8, i32)> {
    let sign = if m < 0 { -1 } else { 1 };
    let mag = m.unsigned_abs();
    (0..64).filter(|b| mag >> b & 1 == 1).map(|b| (sign, b)).collect()
}

/// Minimal signed power-of-two decomposition of `c`.
///
/// The canonical signed-digit form has the fewest nonzero digits; when plain
/// binary needs no more terms it is preferred, so `0.75` becomes
/// `2^-1 + 2^-2` rather than `2^0 - 2^-2`.
pub fn decompose_constant(c: f64, max_terms: usize) -> Result<ShiftAddPlan, FixedError> {
    let (m, f) = dyadic_parts(c)?;
    if m == 0 {
        return Ok(ShiftAddPlan::zero());
    }
    let naf = naf_digits(m);
    let bin = binary_digits(m);
    let digits = if bin.len() <= naf.len() { bin } else { naf };
    if digits.len() > max_terms {
        return Err(FixedError::NotRepresentable {
            value: c,
            needed: digits.len(),
            max_terms,
        });
    }
    let terms = digits
        .into_iter()
        .rev()
        .map(|(sign, bit)| Term { sign, shift: bit - f })
        .collect();
    Ok(ShiftAddPlan { terms })
}

/// How non-dyadic multiplicative constants are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffPolicy {
    /// Constants must already be dyadic within the term budget.
    Exact,
    /// Round to the nearest multiple of `2^-12` first.
    #[default]
    Quantize,
}

/// Decomposes `c` under `policy`.
pub fn plan_for(c: f64, max_terms: usize, policy: CoeffPolicy) -> Result<ShiftAddPlan, FixedError> {
    match policy {
        CoeffPolicy::Exact => match decompose_constant(c, max_terms) {
            Err(FixedError::NotDyadic(_)) => Err(FixedError::NotRepresentable {
                value: c,
                needed: usize::MAX,
                max_terms,
            }),
            other => other,
        },
        CoeffPolicy::Quantize => {
            let q = FixedPoint::from_f64(c).to_f64();
            decompose_constant(q, max_terms)
        }
    }
}

/// `Σ sign · (x · 2^shift)` accumulated in a wide register and then
/// saturated back to Q8.12. Equals `floor(raw · c)` for the plan's constant.
pub fn mul_by_plan(x: FixedPoint, plan: &ShiftAddPlan) -> (FixedPoint, bool) {
    QFormat::Q8_12.mul_plan(x, plan)
}

/// Multiplies by `dt = 2^-14` with an arithmetic right shift.
pub fn scale_by_dt(x: FixedPoint) -> FixedPoint {
    QFormat::Q8_12.shr(x, DT_SHIFT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifts(p: &ShiftAddPlan) -> Vec<(i8, i32)> {
        p.terms.iter().map(|t| (t.sign, t.shift)).collect()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(FixedPoint::encode(0.203125), (FixedPoint { raw: 832 }, false));
        assert_eq!(FixedPoint::encode(0.0).0.raw(), 0);
        assert_eq!(FixedPoint::encode(200.0), (FixedPoint::MAX, true));
        assert_eq!(FixedPoint::encode(-200.0), (FixedPoint::MIN, true));
        // Ties go to even.
        assert_eq!(FixedPoint::encode(0.5 / 4096.0).0.raw(), 0);
        assert_eq!(FixedPoint::encode(1.5 / 4096.0).0.raw(), 2);
    }

    #[test]
    fn add_abs_saturate() {
        let (s, sat) = FixedPoint::from_f64(1.5).sat_add(FixedPoint::from_f64(2.25));
        assert_eq!((s, sat), (FixedPoint::from_f64(3.75), false));
        assert_eq!(FixedPoint::from_f64(-62.5).sat_abs().0, FixedPoint::from_f64(62.5));
        assert_eq!(
            FixedPoint::from_f64(127.0).sat_add(FixedPoint::from_f64(10.0)),
            (FixedPoint::MAX, true)
        );
        assert_eq!(FixedPoint::MIN.sat_abs(), (FixedPoint::MAX, true));
        assert_eq!(FixedPoint::MIN.sat_neg(), (FixedPoint::MAX, true));
    }

    #[test]
    fn decompositions() {
        let p = decompose_constant(0.203125, 4).unwrap();
        assert_eq!(shifts(&p), vec![(1, -3), (1, -4), (1, -6)]);
        assert_eq!(shifts(&decompose_constant(0.3125, 4).unwrap()), vec![(1, -2), (1, -4)]);
        assert_eq!(shifts(&decompose_constant(0.75, 4).unwrap()), vec![(1, -1), (1, -2)]);
        assert_eq!(shifts(&decompose_constant(0.625, 4).unwrap()), vec![(1, -1), (1, -3)]);
        assert_eq!(shifts(&decompose_constant(0.375, 4).unwrap()), vec![(1, -2), (1, -3)]);
        assert_eq!(shifts(&decompose_constant(0.875, 4).unwrap()), vec![(1, 0), (-1, -3)]);
        assert_eq!(shifts(&decompose_constant(-20.0, 4).unwrap()), vec![(-1, 4), (-1, 2)]);
        assert!(decompose_constant(0.0, 1).unwrap().is_empty());
    }

    #[test]
    fn decompose_rejects() {
        assert!(matches!(
            decompose_constant(5.8, 8),
            Err(FixedError::NotRepresentable { .. })
        ));
        assert!(matches!(decompose_constant(f64::NAN, 8), Err(FixedError::NotDyadic(_))));
        assert!(matches!(
            decompose_constant(0.203125, 2),
            Err(FixedError::NotRepresentable { needed: 3, .. })
        ));
        assert!(matches!(
            plan_for(0.02, 8, CoeffPolicy::Exact),
            Err(FixedError::NotRepresentable { .. })
        ));
        let q = plan_for(0.02, 8, CoeffPolicy::Quantize).unwrap();
        assert_eq!(q.value(), 82.0 / 4096.0);
    }

    #[test]
    fn plan_multiplication() {
        let p = decompose_constant(0.75, 4).unwrap();
        assert_eq!(mul_by_plan(FixedPoint::from_f64(8.0), &p).0, FixedPoint::from_f64(6.0));
        let id = decompose_constant(1.0, 1).unwrap();
        let x = FixedPoint::from_f64(-3.25);
        assert_eq!(mul_by_plan(x, &id).0, x);
        let p = decompose_constant(0.375, 4).unwrap();
        let x = FixedPoint::from_f64(-62.5);
        let oracle = (x.raw() as i64 * FixedPoint::from_f64(0.375).raw() as i64) >> 12;
        assert_eq!(mul_by_plan(x, &p).0.raw() as i64, oracle);
        assert_eq!(mul_by_plan(x, &p).0, FixedPoint::from_f64(-23.4375));
        assert!(mul_by_plan(FixedPoint::from_f64(100.0), &decompose_constant(4.0, 1).unwrap()).1);
    }

    #[test]
    fn dt_scaling() {
        for k in [-3i64, 0, 1, 7] {
            let x = FixedPoint::from_raw(16384 * k).0;
            assert_eq!(scale_by_dt(x).raw() as i64, k);
        }
        assert_eq!(scale_by_dt(FixedPoint::from_f64(0.001)).raw(), 0);
        assert_eq!(scale_by_dt(FixedPoint::from_f64(-1.0)).raw(), -1);
    }

    #[test]
    fn wide_format_has_larger_range() {
        let fmt = QFormat::Q8_12_SIGNED;
        fmt.validate().unwrap();
        let (x, sat) = fmt.encode(200.0);
        assert!(!sat);
        assert_eq!(x.to_f64(), 200.0);
        assert!(QFormat {
            word_bits: 40,
            frac_bits: 12
        }
        .validate()
        .is_err());
    }
}
