//! Scalar abstraction for the real-valued parts of the crate.
//!
//! Fee pricing runs either on binary floating point (`f32`, `f64`) or on exact
//! rationals. Everything that needs a ceiling to integer smallest units goes
//! through [`Scalar::ceil_to_u128`].

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

use crate::decimal;

/// Numeric type usable by the fee engine.
pub trait Scalar: Clone + Debug + PartialOrd + Num + FromPrimitive {
    /// Parses a plain decimal literal such as `"0.3057"` or `"12"`.
    fn from_decimal_str(s: &str) -> Option<Self>;

    /// Smallest integer `>= self`, or `None` when negative or not finite.
    fn ceil_to_u128(&self) -> Option<u128>;

    /// Lossy conversion for display.
    fn to_f64_lossy(&self) -> f64;

    /// `10^exp` in this scalar type.
    fn pow10(exp: u32) -> Self {
        let ten = Self::from_u32(10).expect("10 is representable");
        (0..exp).fold(Self::one(), |acc, _| acc * ten.clone())
    }
}

macro_rules! impl_float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn from_decimal_str(s: &str) -> Option<Self> {
                s.trim().parse::<$t>().ok().filter(|v| v.is_finite())
            }

            fn ceil_to_u128(&self) -> Option<u128> {
                if !self.is_finite() || *self < 0.0 {
                    return None;
                }
                self.ceil().to_u128()
            }

            fn to_f64_lossy(&self) -> f64 {
                *self as f64
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for BigRational {
    fn from_decimal_str(s: &str) -> Option<Self> {
        decimal::parse_rational(s)
    }

    fn ceil_to_u128(&self) -> Option<u128> {
        if self.is_negative() {
            return None;
        }
        self.ceil().to_integer().to_u128()
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn pow10(exp: u32) -> Self {
        BigRational::from_integer(num_traits::pow(BigInt::from(10u8), exp as usize))
    }
}

/// Returns true when `x` is strictly positive.
pub fn is_positive<S: Scalar>(x: &S) -> bool {
    *x > S::zero()
}
