//! Scalar abstraction for the APC index algebra.
//!
//! The design matrix and group action only need field arithmetic, so they are
//! generic over any signed number type: `f32`, `f64`, and exact rationals.

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed};
use std::fmt::Debug;

pub trait Scalar: Clone + Debug + PartialOrd + Signed + FromPrimitive + Send + Sync + 'static {
    fn from_index(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("index representable in scalar type")
    }

    fn from_int(n: isize) -> Self {
        <Self as FromPrimitive>::from_isize(n).expect("index representable in scalar type")
    }
}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Signed + FromPrimitive + Send + Sync + 'static {}

/// Exact arithmetic used to certify ranks without a tolerance.
pub type Exact = BigRational;
