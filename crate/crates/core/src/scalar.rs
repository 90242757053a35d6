//! Floating-point abstraction shared by the analytic modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the closed-form machinery is written against: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    /// Widening conversion used for error payloads and reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute tolerance for root finding in `u`, never tighter than a few ulps.
    #[inline]
    fn root_tolerance(scale: Self) -> Self {
        let floor = Self::epsilon() * Self::lit(8.0) * scale.abs().max(Self::one());
        Self::lit(1e-12).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
