//! Numeric abstraction shared by the float path and the exact rational path.
//!
//! Every finite `f64` is a dyadic rational, so converting inputs with
//! [`Scalar::from_f64`] into [`Exact`] loses nothing; comparisons on that
//! path are exact.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

pub type Exact = BigRational;

pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;
    fn abs(&self) -> Self;
    /// Smallest integer >= self; `None` if negative or not representable.
    fn ceil_u64(&self) -> Option<u64>;
    fn powu(&self, exp: u64) -> Self;
    /// Slack used when collecting near-ties from a dynamic program whose
    /// summation order differs from the canonical one.
    fn tie_slack(scale: &Self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn ceil_u64(&self) -> Option<u64> {
        if self.is_finite() && *self >= 0.0 && *self < u64::MAX as f64 {
            Some(self.ceil() as u64)
        } else {
            None
        }
    }
    fn powu(&self, exp: u64) -> Self {
        if exp <= i32::MAX as u64 {
            self.powi(exp as i32)
        } else {
            self.powf(exp as f64)
        }
    }
    fn tie_slack(scale: &Self) -> Self {
        1e-12 * f64::abs(*scale).max(1.0)
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).expect("finite f64")
    }
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn ceil_u64(&self) -> Option<u64> {
        if self.is_negative() {
            return None;
        }
        self.ceil().to_integer().to_u64()
    }
    fn powu(&self, exp: u64) -> Self {
        // square-and-multiply
        let mut base = self.clone();
        let mut acc = <Self as Scalar>::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }
    fn tie_slack(_scale: &Self) -> Self {
        <Self as Scalar>::zero()
    }
}

/// Minimum of a non-empty iterator under `PartialOrd`.
pub fn min_of<T: Scalar>(items: impl IntoIterator<Item = T>) -> Option<T> {
    items.into_iter().fold(None, |acc, x| match acc {
        None => Some(x),
        Some(a) => Some(if x < a { x } else { a }),
    })
}
