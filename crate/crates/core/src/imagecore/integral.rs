use crate::imagecore::GrayImage;
use crate::scalar::Scalar;

/// Summed-area tables of values and squared values.
///
/// Both tables are `(width + 1) x (height + 1)`; row 0 and column 0 are zero,
/// so the sum over `[x, x + w) x [y, y + h)` is four lookups.
#[derive(Clone, Debug)]
pub struct IntegralImage<T = f64> {
    width: usize,
    height: usize,
    sums: Vec<T>,
    squares: Vec<T>,
}

impl<T: Scalar> IntegralImage<T> {
    pub fn new(img: &GrayImage<T>) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sums = vec![T::zero(); stride * (h + 1)];
        let mut squares = vec![T::zero(); stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = T::zero();
            let mut row_sq = T::zero();
            let src = img.row(y);
            for x in 0..w {
                let v = src[x];
                row_sum = row_sum + v;
                row_sq = row_sq + v * v;
                let above = y * stride + x + 1;
                let here = (y + 1) * stride + x + 1;
                sums[here] = sums[above] + row_sum;
                squares[here] = squares[above] + row_sq;
            }
        }
        Self {
            width: w,
            height: h,
            sums,
            squares,
        }
    }

    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw tables (values, squares) and their row stride.
    pub(crate) fn tables(&self) -> (&[T], &[T], usize) {
        (&self.sums, &self.squares, self.width + 1)
    }

    /// Cumulative sum of the values in `[0, i) x [0, j)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.sums[j * (self.width + 1) + i]
    }

    /// Cumulative sum of the squared values in `[0, i) x [0, j)`.
    #[inline]
    pub fn square_entry(&self, i: usize, j: usize) -> T {
        self.squares[j * (self.width + 1) + i]
    }

    #[inline]
    fn corners(table: &[T], stride: usize, x: usize, y: usize, w: usize, h: usize) -> T {
        let a = table[y * stride + x];
        let b = table[y * stride + x + w];
        let c = table[(y + h) * stride + x];
        let d = table[(y + h) * stride + x + w];
        d - b - c + a
    }

    /// Sum of values over the rectangle with top-left `(x, y)` and size `w x h`.
    #[inline]
    pub fn sum(&self, x: usize, y: usize, w: usize, h: usize) -> T {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        Self::corners(&self.sums, self.width + 1, x, y, w, h)
    }

    /// Sum of squared values over the rectangle.
    #[inline]
    pub fn sum_sq(&self, x: usize, y: usize, w: usize, h: usize) -> T {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        Self::corners(&self.squares, self.width + 1, x, y, w, h)
    }
}
