//! Luminance image prepared for correlation: summed-area tables plus a
//! lazily computed spectrum for the FFT path.

use std::sync::OnceLock;

use rustfft::num_complex::Complex;

use crate::fft::{fast_len, Fft2d};
use crate::imagecore::{GrayImage, IntegralImage};
use crate::scalar::Scalar;

/// FFT of a luminance image, zero-padded to a 5-smooth size. `data` is in
/// column-major order (see [`Fft2d::forward_transposed`]).
pub struct Spectrum<T: Scalar> {
    pub fft: Fft2d<T>,
    pub data: Vec<Complex<T>>,
}

pub struct SearchSurface<T: Scalar = f64> {
    gray: GrayImage<T>,
    integral: IntegralImage<T>,
    spectrum: OnceLock<Spectrum<T>>,
}

impl<T: Scalar> std::fmt::Debug for SearchSurface<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SearchSurface")
            .field("width", &self.gray.width())
            .field("height", &self.gray.height())
            .field("spectrum", &self.spectrum.get().is_some())
            .finish()
    }
}

impl<T: Scalar> SearchSurface<T> {
    pub fn new(gray: GrayImage<T>) -> Self {
        let integral = IntegralImage::new(&gray);
        Self {
            gray,
            integral,
            spectrum: OnceLock::new(),
        }
    }

    #[inline]
    pub fn gray(&self) -> &GrayImage<T> {
        &self.gray
    }

    #[inline]
    pub fn integral(&self) -> &IntegralImage<T> {
        &self.integral
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.gray.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.gray.height()
    }

    /// Padded transform size used for the spectrum.
    pub fn fft_dims(&self) -> (usize, usize) {
        (fast_len(self.width()), fast_len(self.height()))
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        self.spectrum.get_or_init(|| {
            let h = self.height();
            let (nw, nh) = self.fft_dims();
            let fft = Fft2d::new(nw, nh);
            let mut data = vec![Complex::default(); nw * nh];
            for y in 0..h {
                for (x, &v) in self.gray.row(y).iter().enumerate() {
                    data[y * nw + x] = Complex::new(v, T::zero());
                }
            }
            fft.forward_transposed(&mut data);
            Spectrum { fft, data }
        })
    }
}
