//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the models are evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative slack used by guards that must tolerate rounding in this type.
    #[inline]
    fn guard_rel() -> Self {
        Self::lit(1e-9).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(1 + exp(x))` without overflow for large `x` or loss of precision for very negative `x`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    let thirty = T::lit(30.0);
    if x > thirty {
        x + (-x).exp().ln_1p()
    } else if x < -thirty {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}
