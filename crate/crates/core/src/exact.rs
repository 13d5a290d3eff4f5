//! Exact sums of finite `f64` values.
//!
//! Every finite double is an integer multiple of `2^-1074`, so a big integer
//! scaled by that quantum represents any finite sum of doubles exactly.
//! Accumulation is therefore associative and commutative, which is what makes
//! empirical-measure shards mergeable in any order.

use std::cmp::Ordering;
use std::ops::{AddAssign, Neg};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

const QUANTUM_EXP: i64 = 1074;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExactSum(BigInt);

impl ExactSum {
    pub fn zero() -> Self {
        ExactSum(BigInt::zero())
    }

    /// # Panics
    /// On NaN or infinite input.
    pub fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "ExactSum only holds finite values, got {v}");
        if v == 0.0 {
            return Self::zero();
        }
        let bits = v.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if biased == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let n = BigInt::from(mant) << ((exp + QUANTUM_EXP) as usize);
        ExactSum(if neg { -n } else { n })
    }

    pub fn from_i64(n: i64) -> Self {
        ExactSum(BigInt::from(n) << QUANTUM_EXP as usize)
    }

    pub fn add_f64(&mut self, v: f64) {
        *self += &ExactSum::from_f64(v);
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn abs(&self) -> Self {
        ExactSum(self.0.abs())
    }

    pub fn scale(&self, k: i64) -> Self {
        ExactSum(&self.0 * k)
    }

    /// Nearest double (to within one ulp).
    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        let bits = self.0.bits() as i64;
        let shift = (bits - 128).max(0);
        let top = (self.0.abs() >> shift as usize).to_u128().unwrap_or(u128::MAX) as f64;
        let mut e = shift - QUANTUM_EXP;
        let mut out = top;
        while e > 1000 {
            out *= 2f64.powi(1000);
            e -= 1000;
        }
        while e < -1000 {
            out *= 2f64.powi(-1000);
            e += 1000;
        }
        out *= 2f64.powi(e as i32);
        if self.0.is_negative() {
            -out
        } else {
            out
        }
    }

    /// `self / n` rounded to a double.
    pub fn mean(&self, n: u64) -> f64 {
        self.to_f64() / n as f64
    }
}

impl<'a> AddAssign<&'a ExactSum> for ExactSum {
    fn add_assign(&mut self, rhs: &'a ExactSum) {
        self.0 += &rhs.0;
    }
}

impl<'a> std::ops::Sub<&'a ExactSum> for &'a ExactSum {
    type Output = ExactSum;
    fn sub(self, rhs: &'a ExactSum) -> ExactSum {
        ExactSum(&self.0 - &rhs.0)
    }
}

impl Neg for ExactSum {
    type Output = ExactSum;
    fn neg(self) -> ExactSum {
        ExactSum(-self.0)
    }
}

impl PartialOrd for ExactSum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactSum {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn represents_extremes() {
        for v in [f64::MIN_POSITIVE, 5e-324, f64::MAX, -1.5, 0.1, 1.0] {
            assert_eq!(ExactSum::from_f64(v).to_f64(), v);
        }
    }

    #[test]
    fn cancellation_is_exact() {
        let mut s = ExactSum::zero();
        s.add_f64(1e300);
        s.add_f64(1e-300);
        s.add_f64(-1e300);
        assert_eq!(s.to_f64(), 1e-300);
    }

    proptest! {
        #[test]
        fn order_independent(xs in prop::collection::vec(-1e6f64..1e6, 0..40)) {
            let mut fwd = ExactSum::zero();
            for x in &xs { fwd.add_f64(*x); }
            let mut rev = ExactSum::zero();
            for x in xs.iter().rev() { rev.add_f64(*x); }
            prop_assert_eq!(fwd, rev);
        }
    }
}
