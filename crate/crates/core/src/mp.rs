//! Arbitrary-precision reals.
//!
//! [`Real`] wraps an [`astro_float::BigFloat`] together with the precision
//! (in bits) it is carried at. Binary operations run at the minimum of the
//! operands' precisions, which is the propagation rule used throughout the
//! group and orbit code.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_traits::{ToPrimitive, Zero};

const RM: RoundingMode = RoundingMode::ToEven;

/// Smallest precision accepted anywhere; below this astro-float would round
/// f64 inputs.
pub const MIN_PRECISION: usize = 64;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

fn word_precision(p: usize) -> usize {
    p.max(MIN_PRECISION)
}

#[derive(Clone)]
pub struct Real {
    v: BigFloat,
    p: usize,
}

impl Real {
    pub fn from_f64(x: f64, p: usize) -> Self {
        let p = word_precision(p);
        Real {
            v: BigFloat::from_f64(x, p),
            p,
        }
    }

    pub fn from_i64(x: i64, p: usize) -> Self {
        let p = word_precision(p);
        Real {
            v: BigFloat::from_i64(x, p),
            p,
        }
    }

    pub fn zero(p: usize) -> Self {
        Self::from_i64(0, p)
    }

    pub fn one(p: usize) -> Self {
        Self::from_i64(1, p)
    }

    pub fn from_bigint(n: &BigInt, p: usize) -> Self {
        let p = word_precision(p);
        if n.is_zero() {
            return Self::zero(p);
        }
        let (sign, mag) = n.to_u64_digits();
        let bits = n.bits() as usize;
        // Exact construction needs enough bits for the integer itself.
        let work = p.max(bits + 64);
        let mut acc = BigFloat::from_u64(0, work);
        let base = BigFloat::from_u64(1u64 << 32, work).mul(&BigFloat::from_u64(1u64 << 32, work), work, RM);
        for d in mag.iter().rev() {
            acc = acc.mul(&base, work, RM).add(&BigFloat::from_u64(*d, work), work, RM);
        }
        if sign == BigSign::Minus {
            acc.inv_sign();
        }
        let mut r = Real { v: acc, p: work };
        r.set_precision(p);
        r
    }

    pub fn precision(&self) -> usize {
        self.p
    }

    pub fn with_precision(&self, p: usize) -> Self {
        let mut r = self.clone();
        r.set_precision(p);
        r
    }

    fn set_precision(&mut self, p: usize) {
        let p = word_precision(p);
        if p != self.p {
            // Setting precision only fails for NaN/Inf, which never reach here.
            let _ = self.v.set_precision(p, RM);
            self.p = p;
        }
    }

    pub fn raw(&self) -> &BigFloat {
        &self.v
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.v.is_negative() && !self.v.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.v.is_nan() || self.v.is_inf())
    }

    /// Binary exponent `e` with `2^(e-1) <= |x| < 2^e`; `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.v.is_zero() {
            None
        } else {
            self.v.exponent().map(|e| e as i64)
        }
    }

    /// Rough base-2 logarithm of `|x|`, good to one unit; `-inf` at zero.
    pub fn log2_abs(&self) -> f64 {
        match self.exponent() {
            None => f64::NEG_INFINITY,
            Some(e) => e as f64 + self.mantissa_fraction().log2(),
        }
    }

    fn mantissa_fraction(&self) -> f64 {
        // Leading word in [2^63, 2^64) mapped to [0.5, 1).
        match self.v.as_raw_parts() {
            Some((words, _, _, _, _)) if !words.is_empty() => *words.last().unwrap() as f64 / 18446744073709551616.0,
            _ => 0.5,
        }
    }

    /// Nearest f64 (rounding through the leading mantissa word).
    pub fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.v.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let Some((words, _, sign, e, _)) = self.v.as_raw_parts() else {
            return f64::NAN;
        };
        if words.is_empty() || self.v.is_zero() {
            return 0.0;
        }
        let top = words[words.len() - 1] as u128;
        let next = if words.len() > 1 { words[words.len() - 2] as u128 } else { 0 };
        let m = ((top << 64) | next) as f64; // correctly rounded to 53 bits
        let mag = scale2(m, e as i64 - 128);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// Exact conversion of an integral value.
    pub fn to_bigint(&self) -> Option<BigInt> {
        if !self.is_finite() || !self.v.is_int() {
            return None;
        }
        if self.v.is_zero() {
            return Some(BigInt::zero());
        }
        let (words, _, sign, e, _) = self.v.as_raw_parts()?;
        let mut digits = Vec::with_capacity(words.len() * 2);
        for w in words {
            digits.push(*w as u32);
            digits.push((*w >> 32) as u32);
        }
        let mant = BigUint::new(digits);
        let shift = e as i64 - 64 * words.len() as i64;
        let mag = if shift >= 0 {
            mant << (shift as usize)
        } else {
            mant >> ((-shift) as usize)
        };
        let sign = if sign == Sign::Neg { BigSign::Minus } else { BigSign::Plus };
        Some(BigInt::from_biguint(sign, mag))
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.to_bigint().and_then(|b| b.to_i64())
    }

    pub fn abs(&self) -> Self {
        Real {
            v: self.v.abs(),
            p: self.p,
        }
    }

    pub fn sqr(&self) -> Self {
        self * self
    }

    pub fn sqrt(&self) -> Self {
        Real {
            v: self.v.sqrt(self.p, RM),
            p: self.p,
        }
    }

    pub fn recip(&self) -> Self {
        Real {
            v: self.v.reciprocal(self.p, RM),
            p: self.p,
        }
    }

    pub fn floor(&self) -> Self {
        Real {
            v: self.v.floor(),
            p: self.p,
        }
    }

    /// Nearest integer, halves rounded up (so `x - round(x)` lies in `[-1/2, 1/2)`).
    pub fn round_half_up(&self) -> Self {
        let half = Real::from_f64(0.5, self.p);
        (self + &half).floor()
    }

    pub fn sin(&self) -> Self {
        let v = with_consts(|cc| self.v.sin(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn cos(&self) -> Self {
        let v = with_consts(|cc| self.v.cos(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn sinh(&self) -> Self {
        let v = with_consts(|cc| self.v.sinh(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn cosh(&self) -> Self {
        let v = with_consts(|cc| self.v.cosh(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn exp(&self) -> Self {
        let v = with_consts(|cc| self.v.exp(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn ln(&self) -> Self {
        let v = with_consts(|cc| self.v.ln(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn asin(&self) -> Self {
        let v = with_consts(|cc| self.v.asin(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn atan(&self) -> Self {
        let v = with_consts(|cc| self.v.atan(self.p, RM, cc));
        Real { v, p: self.p }
    }

    pub fn pi(p: usize) -> Self {
        let p = word_precision(p);
        let v = with_consts(|cc| cc.pi(p, RM));
        Real { v, p }
    }

    pub fn max_abs<'a>(xs: impl IntoIterator<Item = &'a Real>) -> f64 {
        xs.into_iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }
}

/// `m * 2^e` without spurious overflow/underflow in the power.
fn scale2(m: f64, e: i64) -> f64 {
    let mut out = m;
    let mut e = e;
    while e > 1000 {
        out *= 2f64.powi(1000);
        e -= 1000;
        if out.is_infinite() {
            return out;
        }
    }
    while e < -1000 {
        out *= 2f64.powi(-1000);
        e += 1000;
        if out == 0.0 {
            return out;
        }
    }
    out * 2f64.powi(e as i32)
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}@{}", self.to_f64(), self.p)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $call:ident) => {
        impl<'a> $trait<&'a Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                let p = self.p.min(rhs.p);
                Real {
                    v: self.v.$call(&rhs.v, p, RM),
                    p,
                }
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &'a Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Real> for &'a Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { v: self.v.neg(), p: self.p }
    }
}

impl<'a> Neg for &'a Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { v: self.v.clone().neg(), p: self.p }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        for x in [0.0, 1.0, -2.5, 1e-300, 3.141592653589793, -7.0e200, 0.1] {
            assert_eq!(Real::from_f64(x, 128).to_f64(), x);
        }
    }

    #[test]
    fn bigint_round_trip() {
        let big: BigInt = "-123456789012345678901234567890123456789".parse().unwrap();
        let r = Real::from_bigint(&big, 256);
        assert_eq!(r.to_bigint().unwrap(), big);
        assert_eq!(Real::from_i64(-17, 64).to_bigint().unwrap(), BigInt::from(-17));
        assert_eq!(Real::from_f64(2.5, 64).to_bigint(), None);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(Real::from_f64(0.5, 64).round_half_up().to_f64(), 1.0);
        assert_eq!(Real::from_f64(-0.5, 64).round_half_up().to_f64(), 0.0);
        assert_eq!(Real::from_f64(-1.7, 64).round_half_up().to_f64(), -2.0);
    }

    #[test]
    fn precision_is_minimum_of_operands() {
        let a = Real::from_f64(1.0, 256);
        let b = Real::from_f64(3.0, 128);
        assert_eq!((&a / &b).precision(), 128);
    }

    #[test]
    fn transcendental_sanity() {
        let p = 200;
        let x = Real::from_f64(0.7, p);
        let s = x.sin();
        let c = x.cos();
        let one = &(&s * &s) + &(&c * &c);
        assert!((one - Real::one(p)).abs().log2_abs() < -190.0);
        assert!((Real::pi(p).to_f64() - std::f64::consts::PI).abs() < 1e-15);
        let e = Real::one(p).exp();
        assert!((e.ln().to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log2_abs_is_close() {
        assert!((Real::from_f64(1024.0, 64).log2_abs() - 10.0).abs() < 1e-9);
        assert!((Real::from_f64(0.75, 64).log2_abs() - 0.75f64.log2()).abs() < 1e-9);
    }
}
