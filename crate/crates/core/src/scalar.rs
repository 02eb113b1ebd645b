//! Scalar abstraction shared by the state algebra, the dynamics and the
//! analytical bounds.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the qubit algebra.
///
/// The associated constants carry precision-dependent tolerances so that the
/// same algorithms run in `f32` with sensible thresholds.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Norm drift above which a state is renormalized.
    const NORM_TOL: f64;
    /// Norm drift above which a state is rejected as corrupted.
    const NORM_DRIFT_MAX: f64;
    /// Rotation angle below which a Pauli exponential is the identity.
    const ZERO_ANGLE: f64;
    /// Magnitude below which an amplitude counts as zero.
    const AMPLITUDE_EPS: f64;

    /// Converts an `f64` literal; every finite literal is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Scalar for f64 {
    const NORM_TOL: f64 = 1e-12;
    const NORM_DRIFT_MAX: f64 = 1e-8;
    const ZERO_ANGLE: f64 = 1e-14;
    const AMPLITUDE_EPS: f64 = 1e-12;
}

impl Scalar for f32 {
    const NORM_TOL: f64 = 1e-6;
    const NORM_DRIFT_MAX: f64 = 1e-3;
    const ZERO_ANGLE: f64 = 1e-7;
    const AMPLITUDE_EPS: f64 = 1e-6;
}
