//! Scalar abstraction for the numerical core.
//!
//! Everything downstream is generic over [`Real`]; `f64` is the default
//! working type (see the aliases at the crate root) and `f32` is available
//! for quick low-precision experiments.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the assembly, eigensolvers and
/// deformation machinery.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy {
    /// Machine epsilon of the concrete type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Shorthand for pulling an `f64` literal into the generic scalar type.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_convert() {
        assert_eq!(lit::<f64>(0.25), 0.25);
        assert_eq!(lit::<f32>(0.25), 0.25f32);
    }
}
