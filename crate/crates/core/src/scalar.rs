//! Floating-point scalar abstraction.
//!
//! Luminance images, integral tables, score maps, and the FFT correlation
//! path are all generic over [`Scalar`], which is implemented for `f32` and
//! `f64`. The pipeline and the CLI use `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for image math: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + rustfft::FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    /// Lossy conversion from `usize`.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
