//! Two-dimensional FFT helpers for correlation.

use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Smallest 5-smooth integer (`2^a 3^b 5^c`) that is at least `n`.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Plans for a `width x height` complex transform, rows then columns.
pub struct Fft2d<T: Scalar> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
    scratch_len: usize,
    /// Recycled work buffers; fresh multi-megabyte allocations cost more
    /// in page faults than the transform itself.
    pool: Mutex<Vec<Vec<Complex<T>>>>,
}

const POOL_LIMIT: usize = 6;

impl<T: Scalar> std::fmt::Debug for Fft2d<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2d({}x{})", self.width, self.height)
    }
}

impl<T: Scalar> Fft2d<T> {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(width);
        let row_inv = planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            width,
            height,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            scratch_len,
            pool: Mutex::new(Vec::new()),
        }
    }

    fn take(&self, len: usize) -> Vec<Complex<T>> {
        let mut buf = self.pool.lock().expect("fft pool").pop().unwrap_or_default();
        buf.clear();
        buf.resize(len, Complex::default());
        buf
    }

    /// A zeroed buffer of [`len`](Self::len) elements, recycled if possible.
    pub fn buffer(&self) -> Vec<Complex<T>> {
        self.take(self.len())
    }

    /// Returns a buffer for reuse by later transforms.
    pub fn recycle(&self, buf: Vec<Complex<T>>) {
        let mut pool = self.pool.lock().expect("fft pool");
        if pool.len() < POOL_LIMIT {
            pool.push(buf);
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn run(&self, data: &mut [Complex<T>], row: &Arc<dyn Fft<T>>, col: &Arc<dyn Fft<T>>) {
        assert_eq!(data.len(), self.len());
        let mut scratch = self.take(self.scratch_len);
        row.process_with_scratch(data, &mut scratch);
        let mut transposed = self.take(data.len());
        transpose(data, &mut transposed, self.width, self.height);
        col.process_with_scratch(&mut transposed, &mut scratch);
        transpose(&transposed, data, self.height, self.width);
        self.recycle(transposed);
        self.recycle(scratch);
    }

    /// Forward transform of row-major data, leaving the spectrum in
    /// column-major (transposed) order. Paired with
    /// [`inverse_transposed`](Self::inverse_transposed) this skips the two
    /// transposes that element-wise spectrum products never need.
    pub fn forward_transposed(&self, data: &mut Vec<Complex<T>>) {
        assert_eq!(data.len(), self.len());
        let mut scratch = self.take(self.scratch_len);
        self.row_fwd.process_with_scratch(data, &mut scratch);
        let mut transposed = self.take(data.len());
        transpose(data, &mut transposed, self.width, self.height);
        self.col_fwd.process_with_scratch(&mut transposed, &mut scratch);
        std::mem::swap(data, &mut transposed);
        self.recycle(transposed);
        self.recycle(scratch);
    }

    /// Unnormalized inverse of a column-major spectrum, returning row-major data.
    pub fn inverse_transposed(&self, data: &mut Vec<Complex<T>>) {
        assert_eq!(data.len(), self.len());
        let mut scratch = self.take(self.scratch_len);
        self.col_inv.process_with_scratch(data, &mut scratch);
        let mut rows = self.take(data.len());
        transpose(data, &mut rows, self.height, self.width);
        self.row_inv.process_with_scratch(&mut rows, &mut scratch);
        std::mem::swap(data, &mut rows);
        self.recycle(rows);
        self.recycle(scratch);
    }

    /// In-place forward transform of row-major data.
    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// In-place unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], width: usize, height: usize) {
    const BLOCK: usize = 32;
    for by in (0..height).step_by(BLOCK) {
        for bx in (0..width).step_by(BLOCK) {
            for y in by..(by + BLOCK).min(height) {
                for x in bx..(bx + BLOCK).min(width) {
                    dst[x * height + y] = src[y * width + x];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_len_is_smooth_and_minimal() {
        assert_eq!(fast_len(1), 1);
        assert_eq!(fast_len(7), 8);
        assert_eq!(fast_len(97), 100);
        assert_eq!(fast_len(1800), 1800);
        assert_eq!(fast_len(1801), 1875);
    }

    #[test]
    fn transposed_variants_agree() {
        let (w, h) = (12, 5);
        let input: Vec<Complex<f64>> = (0..w * h).map(|i| Complex::new((i * 7 % 11) as f64, (i % 4) as f64)).collect();
        let fft = Fft2d::new(w, h);
        let mut plain = input.clone();
        fft.forward(&mut plain);
        let mut t = input.clone();
        fft.forward_transposed(&mut t);
        for y in 0..h {
            for x in 0..w {
                assert!((plain[y * w + x] - t[x * h + y]).norm() < 1e-9);
            }
        }
        fft.inverse_transposed(&mut t);
        for (a, b) in t.iter().zip(&input) {
            assert!((a / (w * h) as f64 - b).norm() < 1e-9);
        }
    }

    #[test]
    fn round_trip_restores_input() {
        let (w, h) = (6, 5);
        let input: Vec<Complex<f64>> = (0..w * h).map(|i| Complex::new(i as f64, (i % 3) as f64)).collect();
        let mut data = input.clone();
        let fft = Fft2d::new(w, h);
        fft.forward(&mut data);
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&input) {
            assert!((a / (w * h) as f64 - b).norm() < 1e-12);
        }
    }
}
