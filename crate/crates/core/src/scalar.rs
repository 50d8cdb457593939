//! Numeric abstraction shared by the parameter map and the moment formulas.
//!
//! Everything that is pure field arithmetic (the coefficient correspondence,
//! first and second moments) is generic over [`Scalar`], so the same code
//! path runs on `f64` in production and on exact rationals in tests.

use std::fmt::Debug;

use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Copy + PartialOrd + Debug + ToPrimitive + Send + Sync + 'static {
    /// Lossy conversion used for tolerance checks and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }

    fn is_positive(self) -> bool {
        self > Self::zero()
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + Debug + ToPrimitive + Send + Sync + 'static {}

pub(crate) fn sum<T: Scalar>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |acc, x| acc + x)
}
