use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the planner: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Working tolerance for iterative solvers at this precision.
    fn solver_tol() -> Self {
        Self::epsilon().powf(Self::lit(0.65))
    }

    fn pos(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<F: Scalar>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |m, &v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_part() {
        assert_eq!((-2.0f64).pos(), 0.0);
        assert_eq!(3.5f32.pos(), 3.5);
    }

    #[test]
    fn tolerance_scales_with_precision() {
        assert!(f64::solver_tol() < 1e-9);
        assert!(f32::solver_tol() > 1e-6 && f32::solver_tol() < 1e-3);
    }
}
