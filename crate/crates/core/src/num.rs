//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + NumAssign
    + FloatConst
    + FromPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a real scalar.
pub type C<T> = Complex<T>;

pub(crate) fn c_real<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// Wraps a phase into the half-open interval (-pi, pi].
pub fn wrap_phase<T: Real>(phi: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = phi - two_pi * ((phi + T::PI()) / two_pi).floor();
    // floor maps the boundary to -pi; flip it to the closed end
    if w <= -T::PI() {
        w += two_pi;
    }
    w
}

/// Shortest signed distance between two phases, in (-pi, pi].
pub fn phase_distance<T: Real>(a: T, b: T) -> T {
    wrap_phase(a - b)
}
