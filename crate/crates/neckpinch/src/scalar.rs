//! Floating-point scalar abstraction for the closed-form layer.

use num_traits as nt;

/// Floating point scalar: `f32` or `f64`.
pub trait Real: nt::Float + nt::FloatConst + nt::FromPrimitive + core::fmt::Debug {
    /// Lossless conversion from `f64` for constants baked into formulas.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
