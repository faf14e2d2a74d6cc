//! Scalar abstraction for thresholds.
//!
//! Distances and peakedness counts are integers; only the similarity
//! threshold is real-valued. Any ordered numeric type that can represent
//! character counts works: `f32`, `f64`, or an exact rational.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Exact rational scalar; `τ` computed in this type never suffers binary
/// rounding at cluster boundaries.
pub type Rational = num_rational::Ratio<i64>;

pub trait Scalar:
    Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("character counts fit every scalar type")
    }
}

impl<T> Scalar for T where
    T: Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
}
