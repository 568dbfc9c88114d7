//! Scalar abstraction for the numeric core.
//!
//! Everything in this crate is generic over a floating-point scalar so the
//! same code runs at `f32` or `f64`. Concrete `f64` aliases for the main
//! domain types live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the simulator is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts a finite `f64` constant into `Self`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Lossy view of `self` as `f64`, used for diagnostics and errors.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Complex number over the crate scalar.
pub type C<T> = Complex<T>;
