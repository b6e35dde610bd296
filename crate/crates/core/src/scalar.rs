//! Scalar abstraction shared by the exact Fourier code.
//!
//! `f32` and `f64` are the floating instantiations; [`Exact`] is a rational
//! type that keeps dyadic tables exact through transforms and fibers.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, Signed, ToPrimitive};

/// Exact rational scalar. Denominators stay powers of two for dyadic inputs.
pub type Exact = Ratio<i128>;

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// Conversion from `f64`. Exact for `Exact` whenever the binary exponent fits.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// True when arithmetic on this type never rounds.
    fn is_exact() -> bool;

    fn from_i64(v: i64) -> Self {
        Self::from_f64(v as f64)
    }

    /// 2^{-k}
    fn dyadic(k: u32) -> Self {
        let mut v = Self::one();
        let two = Self::one() + Self::one();
        for _ in 0..k {
            v = v / two.clone();
        }
        v
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_exact() -> bool {
        false
    }
    fn dyadic(k: u32) -> Self {
        (-(k as f64)).exp2()
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn is_exact() -> bool {
        false
    }
    fn dyadic(k: u32) -> Self {
        (-(k as f32)).exp2()
    }
}

impl Scalar for Exact {
    /// Decomposes `v = m·2^e` and builds the ratio directly. Mantissa bits
    /// below 2^-120 are dropped so the denominator fits in `i128`.
    fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite value has no rational form");
        if v == 0.0 {
            return Ratio::from_integer(0);
        }
        let bits = v.to_bits();
        let sign: i128 = if bits >> 63 == 1 { -1 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mut mant, mut exp) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        while mant & 1 == 0 && mant != 0 {
            mant >>= 1;
            exp += 1;
        }
        if exp >= 0 {
            assert!(exp < 74, "value too large for an exact ratio");
            Ratio::from_integer(sign * (mant << exp))
        } else {
            let mut e = -exp;
            if e > 120 {
                mant >>= (e - 120).min(127);
                e = 120;
            }
            Ratio::new(sign * mant, 1i128 << e)
        }
    }
    fn to_f64(&self) -> f64 {
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) => n / d,
            _ => f64::NAN,
        }
    }
    fn is_exact() -> bool {
        true
    }
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }
    fn dyadic(k: u32) -> Self {
        Ratio::new(1, 1i128 << k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_from_f64_roundtrips_dyadics() {
        for v in [0.0, 1.0, -1.0, 0.5, -0.375, 3.0 / 256.0, 1e-20, 12345.0] {
            let r = Exact::from_f64(v);
            assert_eq!(Scalar::to_f64(&r), v);
        }
        assert_eq!(Exact::from_f64(0.75), Ratio::new(3, 4));
    }

    #[test]
    fn exact_from_f64_of_decimal_is_its_binary_value() {
        let r = Exact::from_f64(0.1);
        assert_eq!(*r.denom(), 1i128 << 55);
        assert_eq!(Scalar::to_f64(&r), 0.1);
    }

    #[test]
    fn dyadic_agrees_across_types() {
        for k in 0..30 {
            assert_eq!(f64::dyadic(k), Scalar::to_f64(&Exact::dyadic(k)));
            assert_eq!(f32::dyadic(k) as f64, f64::dyadic(k));
        }
    }
}
