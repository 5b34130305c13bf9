//! Floating-point abstraction shared by the numerical layers.
//!
//! Everything that does arithmetic on weights, regressors or covariance
//! matrices is written against [`Scalar`], so the same code runs in `f32` and
//! `f64`. Engineering data (plant logs, closed-loop traces) stays `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Name used in model files so a loader can warn about precision changes.
    const NAME: &'static str;

    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Logistic sigmoid, evaluated so that large negative arguments do not overflow.
#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

pub(crate) fn all_finite<S: Scalar>(xs: &[S]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        assert_eq!(sigmoid(0.0_f64), 0.5);
        for &x in &[0.1, 1.0, 7.5, 40.0, 800.0] {
            let a = sigmoid(x);
            let b = sigmoid(-x);
            assert!((a + b - 1.0_f64).abs() < 1e-15);
            assert!(a.is_finite() && b.is_finite());
        }
        assert!(sigmoid(-800.0_f32) >= 0.0);
    }
}
