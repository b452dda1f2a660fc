use crate::error::{Error, Result};
use crate::imagecore::{RasterImage, RectRegion};
use crate::scalar::Scalar;

/// Row-major single-channel luminance image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T = f64> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    pub fn from_values(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "value count must equal a positive width x height",
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::from_values(width, height, values)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    pub fn crop(&self, r: RectRegion) -> Result<Self> {
        r.check_within(self.width, self.height)?;
        let mut values = Vec::with_capacity(r.area());
        for y in r.y..r.bottom() {
            values.extend_from_slice(&self.row(y)[r.x..r.right()]);
        }
        Self::from_values(r.w, r.h, values)
    }

    /// Halves both dimensions (rounding down, never below one pixel) by
    /// averaging 2x2 blocks. A trailing odd row or column is dropped.
    pub fn downsample2(&self) -> Self {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let quarter = T::of(0.25);
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            let y0 = (2 * y).min(self.height - 1);
            let y1 = (2 * y + 1).min(self.height - 1);
            for x in 0..w {
                let x0 = (2 * x).min(self.width - 1);
                let x1 = (2 * x + 1).min(self.width - 1);
                let s = self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1);
                values.push(s * quarter);
            }
        }
        Self {
            width: w,
            height: h,
            values,
        }
    }

    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |a, &v| a + v);
        sum / T::of_usize(self.values.len())
    }
}

/// Luminance `(0.299 R + 0.587 G + 0.114 B) / 255`, clamped to `[0, 1]`.
pub fn to_gray<T: Scalar>(img: &RasterImage) -> GrayImage<T> {
    let values = img
        .pixels()
        .iter()
        .map(|&[r, g, b]| {
            // Integer numerator keeps white at exactly 1.
            let num = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
            T::of((f64::from(num) / 255_000.0).clamp(0.0, 1.0))
        })
        .collect();
    GrayImage {
        width: img.width(),
        height: img.height(),
        values,
    }
}
