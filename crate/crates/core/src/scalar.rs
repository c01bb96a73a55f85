//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + Debug + Display + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest condition number treated as numerically invertible.
    fn max_condition() -> Self {
        let by_precision = Self::lit(0.01) / Self::epsilon();
        by_precision.min(Self::lit(1e12))
    }
}

impl Real for f32 {}
impl Real for f64 {}
