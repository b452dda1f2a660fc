//! Zero-normalized cross-correlation score maps.
//!
//! For a template `T` of `n` pixels and the window `I` under it,
//!
//! ```text
//! score = sum((T - mean T) (I - mean I)) / sqrt(sum (T - mean T)^2 * sum (I - mean I)^2)
//! ```
//!
//! Since the zero-mean template sums to zero, the numerator reduces to
//! `sum((T - mean T) I)`, a plain correlation computed either directly or by
//! FFT. The window variance comes from the summed-area tables in O(1).
//! Windows (or templates) with no variance score 0.

use crate::error::{Error, Result};
use crate::imagecore::{GrayImage, IntegralImage};
use crate::scalar::Scalar;
use crate::surface::SearchSurface;

/// Template with its mean removed and its energy precomputed.
#[derive(Clone, Debug)]
pub struct PreparedTemplate<T: Scalar = f64> {
    width: usize,
    height: usize,
    centred: Vec<T>,
    energy: T,
}

impl<T: Scalar> PreparedTemplate<T> {
    pub fn new(template: &GrayImage<T>) -> Self {
        let mean = template.mean();
        let centred: Vec<T> = template.values().iter().map(|&v| v - mean).collect();
        let energy = centred.iter().fold(T::zero(), |a, &v| a + v * v);
        let raw = template.values().iter().fold(T::zero(), |a, &v| a + v * v);
        let energy = if energy <= raw * degenerate_ratio::<T>() { T::zero() } else { energy };
        Self {
            width: template.width(),
            height: template.height(),
            centred,
            energy,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// `sum (T - mean T)^2`; zero for a constant template.
    pub fn energy(&self) -> T {
        self.energy
    }

    #[inline]
    fn row(&self, y: usize) -> &[T] {
        &self.centred[y * self.width..(y + 1) * self.width]
    }
}

/// Relative variance below which a window or template counts as constant.
///
/// Summed-area differences lose about `epsilon * total` to cancellation, so
/// the cut-off is relative to the window's raw second moment.
#[inline]
fn degenerate_ratio<T: Scalar>() -> T {
    T::epsilon().sqrt() * T::of(0.1)
}

/// Grid of scores indexed by template top-left position.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap<T: Scalar = f64> {
    width: usize,
    height: usize,
    scores: Vec<T>,
}

impl<T: Scalar> ScoreMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.scores[y * self.width + x]
    }

    /// Highest score, ties to the smallest `(y, x)`.
    pub fn best(&self) -> (usize, usize, T) {
        let mut best = (0, 0, T::neg_infinity());
        for (i, &s) in self.scores.iter().enumerate() {
            if s > best.2 {
                best = (i % self.width, i / self.width, s);
            }
        }
        best
    }
}

/// How the correlation numerator is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScoreMethod {
    /// Pick whichever of the two is cheaper for the sizes involved.
    #[default]
    Auto,
    Direct,
    Fft,
}

/// Chooses direct correlation when it is estimated to be cheaper than the FFT route.
pub(crate) fn prefer_fft(positions: usize, template_pixels: usize, fft_dims: (usize, usize)) -> bool {
    let n = (fft_dims.0 * fft_dims.1) as f64;
    let direct = positions as f64 * template_pixels as f64;
    // One complex inverse transform plus the template transform.
    let fft = 2.0 * 5.0 * n * n.log2().max(1.0);
    direct > fft
}

/// ZNCC of `template` at every position where it lies fully inside `surface`.
pub fn zncc_score_map<T: Scalar>(surface: &SearchSurface<T>, template: &GrayImage<T>) -> Result<ScoreMap<T>> {
    zncc_score_map_with(surface, &PreparedTemplate::new(template), ScoreMethod::Auto)
}

pub fn zncc_score_map_with<T: Scalar>(
    surface: &SearchSurface<T>,
    template: &PreparedTemplate<T>,
    method: ScoreMethod,
) -> Result<ScoreMap<T>> {
    check_fits(surface, template)?;
    let (mw, mh) = (surface.width() - template.width + 1, surface.height() - template.height + 1);
    let use_fft = match method {
        ScoreMethod::Auto => prefer_fft(mw * mh, template.pixels(), surface.fft_dims()),
        ScoreMethod::Direct => false,
        ScoreMethod::Fft => true,
    };
    if use_fft {
        return Ok(fft_scores(surface, template, None).0);
    }
    let numerators = direct_numerators(surface.gray(), template, 0..mw, 0..mh);
    Ok(scores_from_numerators(surface.integral(), template, numerators, (0, 0), mw, mh))
}

/// Scores two templates against one surface with a single complex FFT
/// (one template in the real part, one in the imaginary part).
pub fn zncc_score_map_pair<T: Scalar>(
    surface: &SearchSurface<T>,
    a: &PreparedTemplate<T>,
    b: &PreparedTemplate<T>,
) -> Result<(ScoreMap<T>, ScoreMap<T>)> {
    check_fits(surface, a)?;
    check_fits(surface, b)?;
    let (ma, mb) = fft_scores(surface, a, Some(b));
    Ok((ma, mb.expect("second template requested")))
}

/// Direct-correlation scores restricted to top-left positions in
/// `[x0, x0 + w) x [y0, y0 + h)`.
pub fn zncc_score_region<T: Scalar>(
    surface: &SearchSurface<T>,
    template: &PreparedTemplate<T>,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> Result<ScoreMap<T>> {
    check_fits(surface, template)?;
    let (mw, mh) = (surface.width() - template.width + 1, surface.height() - template.height + 1);
    if x0 + w > mw || y0 + h > mh || w == 0 || h == 0 {
        return Err(Error::OutOfBounds {
            coordinate: "score region",
            value: (x0 + w).max(y0 + h),
            limit: mw.min(mh),
        });
    }
    let numerators = direct_numerators(surface.gray(), template, x0..x0 + w, y0..y0 + h);
    Ok(scores_from_numerators(surface.integral(), template, numerators, (x0, y0), w, h))
}

fn check_fits<T: Scalar>(surface: &SearchSurface<T>, template: &PreparedTemplate<T>) -> Result<()> {
    if template.width > surface.width() || template.height > surface.height() {
        return Err(Error::TemplateExceedsView {
            template_w: template.width,
            template_h: template.height,
            view_w: surface.width(),
            view_h: surface.height(),
        });
    }
    Ok(())
}

/// Combines correlation numerators with window statistics.
/// `numerators(yy, row)` fills `row` with the numerators of positions
/// `origin + (0.., yy)`; the row is then turned into scores in place.
fn scores_with<T: Scalar>(
    integral: &IntegralImage<T>,
    template: &PreparedTemplate<T>,
    origin: (usize, usize),
    w: usize,
    h: usize,
    numerators: impl Fn(usize, &mut [T]),
) -> ScoreMap<T> {
    let mut scores = vec![T::zero(); w * h];
    if template.energy > T::zero() {
        let inv_n = T::one() / T::of_usize(template.pixels());
        let ratio = degenerate_ratio::<T>();
        let energy = template.energy;
        let (sums, squares, stride) = integral.tables();
        let (tw, th) = (template.width, template.height);
        for (yy, out) in scores.chunks_exact_mut(w).enumerate() {
            numerators(yy, out);
            let top = (origin.1 + yy) * stride + origin.0;
            let bottom = top + th * stride;
            // Equal-length slices let the loop below run without bounds checks.
            let (s_tl, s_tr) = (&sums[top..top + w], &sums[top + tw..top + tw + w]);
            let (s_bl, s_br) = (&sums[bottom..bottom + w], &sums[bottom + tw..bottom + tw + w]);
            let (q_tl, q_tr) = (&squares[top..top + w], &squares[top + tw..top + tw + w]);
            let (q_bl, q_br) = (&squares[bottom..bottom + w], &squares[bottom + tw..bottom + tw + w]);
            for i in 0..w {
                let sum = s_br[i] - s_bl[i] - s_tr[i] + s_tl[i];
                let sum_sq = q_br[i] - q_bl[i] - q_tr[i] + q_tl[i];
                let var = sum_sq - sum * sum * inv_n;
                let score = (out[i] / (energy * var).sqrt()).max(-T::one()).min(T::one());
                out[i] = if var > sum_sq * ratio { score } else { T::zero() };
            }
        }
    }
    ScoreMap {
        width: w,
        height: h,
        scores,
    }
}

fn scores_from_numerators<T: Scalar>(
    integral: &IntegralImage<T>,
    template: &PreparedTemplate<T>,
    numerators: Vec<T>,
    origin: (usize, usize),
    w: usize,
    h: usize,
) -> ScoreMap<T> {
    scores_with(integral, template, origin, w, h, |y, row| row.copy_from_slice(&numerators[y * w..(y + 1) * w]))
}

fn direct_numerators<T: Scalar>(
    image: &GrayImage<T>,
    template: &PreparedTemplate<T>,
    xs: std::ops::Range<usize>,
    ys: std::ops::Range<usize>,
) -> Vec<T> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for y in ys {
        for x in xs.clone() {
            let mut acc = T::zero();
            for ty in 0..template.height {
                let img = &image.row(y + ty)[x..x + template.width];
                let tpl = template.row(ty);
                acc = acc + tpl.iter().zip(img).fold(T::zero(), |a, (&t, &v)| a + t * v);
            }
            out.push(acc);
        }
    }
    out
}

/// Scores via the surface spectrum. The templates are placed flipped so
/// the circular convolution equals the correlation; no wrap-around reaches
/// a valid position because the padded size is at least the surface size.
fn fft_scores<T: Scalar>(
    surface: &SearchSurface<T>,
    a: &PreparedTemplate<T>,
    b: Option<&PreparedTemplate<T>>,
) -> (ScoreMap<T>, Option<ScoreMap<T>>) {
    let spectrum = surface.spectrum();
    let (nw, nh) = (spectrum.fft.width(), spectrum.fft.height());
    let mut buf = spectrum.fft.buffer();
    let mut place = |t: &PreparedTemplate<T>, imaginary: bool| {
        for ty in 0..t.height {
            let row = t.row(ty);
            let fy = (nh - ty) % nh;
            for (tx, &v) in row.iter().enumerate() {
                let fx = (nw - tx) % nw;
                let slot = &mut buf[fy * nw + fx];
                if imaginary {
                    slot.im = v;
                } else {
                    slot.re = v;
                }
            }
        }
    };
    place(a, false);
    if let Some(b) = b {
        place(b, true);
    }
    spectrum.fft.forward_transposed(&mut buf);
    for (z, s) in buf.iter_mut().zip(&spectrum.data) {
        *z = *z * *s;
    }
    spectrum.fft.inverse_transposed(&mut buf);
    let scale = T::one() / T::of_usize(nw * nh);
    let map = |t: &PreparedTemplate<T>, imaginary: bool| {
        let (mw, mh) = (surface.width() - t.width + 1, surface.height() - t.height + 1);
        let buf = &buf;
        scores_with(surface.integral(), t, (0, 0), mw, mh, move |y, row| {
            let src = &buf[y * nw..y * nw + row.len()];
            for (r, z) in row.iter_mut().zip(src) {
                *r = (if imaginary { z.im } else { z.re }) * scale;
            }
        })
    };
    let ma = map(a, false);
    let mb = b.map(|b| map(b, true));
    spectrum.fft.recycle(buf);
    (ma, mb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two-pass ZNCC straight from the definition.
    fn naive(image: &GrayImage<f64>, t: &GrayImage<f64>, x: usize, y: usize) -> f64 {
        let n = (t.width() * t.height()) as f64;
        let mt = t.values().iter().sum::<f64>() / n;
        let mut mi = 0.0;
        for ty in 0..t.height() {
            for tx in 0..t.width() {
                mi += image.get(x + tx, y + ty);
            }
        }
        mi /= n;
        let (mut num, mut st, mut si) = (0.0, 0.0, 0.0);
        for ty in 0..t.height() {
            for tx in 0..t.width() {
                let a = t.get(tx, ty) - mt;
                let b = image.get(x + tx, y + ty) - mi;
                num += a * b;
                st += a * a;
                si += b * b;
            }
        }
        if st == 0.0 || si == 0.0 {
            0.0
        } else {
            num / (st * si).sqrt()
        }
    }

    fn random_gray(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |_, _| rng.gen::<f64>()).unwrap()
    }

    #[test]
    fn accelerated_matches_naive_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let view = random_gray(&mut rng, 16, 16);
        let tpl = random_gray(&mut rng, 4, 4);
        let surface = SearchSurface::new(view.clone());
        let prepared = PreparedTemplate::new(&tpl);
        for method in [ScoreMethod::Direct, ScoreMethod::Fft, ScoreMethod::Auto] {
            let map = zncc_score_map_with(&surface, &prepared, method).unwrap();
            assert_eq!((map.width(), map.height()), (13, 13));
            for y in 0..13 {
                for x in 0..13 {
                    assert!((map.get(x, y) - naive(&view, &tpl, x, y)).abs() < 1e-6, "{method:?} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn self_match_scores_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let view = random_gray(&mut rng, 40, 30);
        let tpl = view.crop(crate::imagecore::RectRegion::new(11, 7, 9, 12)).unwrap();
        let map = zncc_score_map(&SearchSurface::new(view), &tpl).unwrap();
        assert!((map.get(11, 7) - 1.0).abs() < 1e-6);
        assert_eq!(map.best().0, 11);
        assert_eq!(map.best().1, 7);
    }

    #[test]
    fn constant_template_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let surface = SearchSurface::new(random_gray(&mut rng, 20, 20));
        let tpl = GrayImage::from_values(5, 5, vec![0.4; 25]).unwrap();
        for method in [ScoreMethod::Direct, ScoreMethod::Fft] {
            let map = zncc_score_map_with(&surface, &PreparedTemplate::new(&tpl), method).unwrap();
            assert!(map.scores().iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn constant_window_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let view = GrayImage::from_fn(30, 30, |x, _| if x < 15 { 1.0 } else { 0.3 }).unwrap();
        let tpl = random_gray(&mut rng, 6, 6);
        let map = zncc_score_map_with(&SearchSurface::new(view), &PreparedTemplate::new(&tpl), ScoreMethod::Fft).unwrap();
        assert_eq!(map.get(0, 0), 0.0);
        assert_eq!(map.get(20, 10), 0.0);
    }

    #[test]
    fn oversized_template_errors() {
        let surface = SearchSurface::new(GrayImage::from_values(4, 4, vec![0.5; 16]).unwrap());
        let tpl = GrayImage::from_values(5, 2, vec![0.5; 10]).unwrap();
        let err = zncc_score_map(&surface, &tpl).unwrap_err();
        assert!(err.to_string().starts_with("template exceeds view"));
    }

    #[test]
    fn paired_fft_equals_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let surface = SearchSurface::new(random_gray(&mut rng, 33, 21));
        let a = PreparedTemplate::new(&random_gray(&mut rng, 7, 5));
        let b = PreparedTemplate::new(&random_gray(&mut rng, 4, 9));
        let (pa, pb) = zncc_score_map_pair(&surface, &a, &b).unwrap();
        let sa = zncc_score_map_with(&surface, &a, ScoreMethod::Direct).unwrap();
        let sb = zncc_score_map_with(&surface, &b, ScoreMethod::Direct).unwrap();
        for (x, y) in pa.scores().iter().zip(sa.scores()).chain(pb.scores().iter().zip(sb.scores())) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn region_scores_match_full_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let surface = SearchSurface::new(random_gray(&mut rng, 30, 25));
        let t = PreparedTemplate::new(&random_gray(&mut rng, 6, 4));
        let full = zncc_score_map_with(&surface, &t, ScoreMethod::Direct).unwrap();
        let part = zncc_score_region(&surface, &t, 3, 4, 10, 8).unwrap();
        for y in 0..8 {
            for x in 0..10 {
                assert_eq!(part.get(x, y), full.get(x + 3, y + 4));
            }
        }
        assert!(zncc_score_region(&surface, &t, 20, 0, 10, 1).is_err());
    }

    #[test]
    fn single_precision_tracks_double() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v64 = random_gray(&mut rng, 24, 24);
        let t64 = random_gray(&mut rng, 8, 8);
        let v32 = GrayImage::<f32>::from_fn(24, 24, |x, y| v64.get(x, y) as f32).unwrap();
        let t32 = GrayImage::<f32>::from_fn(8, 8, |x, y| t64.get(x, y) as f32).unwrap();
        let m64 = zncc_score_map(&SearchSurface::new(v64), &t64).unwrap();
        let m32 = zncc_score_map_with(&SearchSurface::new(v32), &PreparedTemplate::new(&t32), ScoreMethod::Fft).unwrap();
        for (a, b) in m64.scores().iter().zip(m32.scores()) {
            assert!((a - f64::from(*b)).abs() < 1e-3);
        }
    }
}
