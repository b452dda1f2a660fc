use crate::imagecore::{RasterImage, Rgb};

/// Affine geometry of a counter-clockwise rotation about the image centre
/// onto the tight bounding canvas.
///
/// Point maps work in pixel-index coordinates: pixel `(i, j)` is the unit
/// square whose centre is `(i + 0.5, j + 0.5)` in continuous space, and maps
/// take and return the index-space position `continuous - 0.5`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationGeometry {
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
    degrees: f64,
    cos: f64,
    sin: f64,
}

impl RotationGeometry {
    /// Geometry for rotating a `src_w x src_h` image by `degrees`
    /// (counter-clockwise; any real value, reduced modulo 360).
    ///
    /// The canvas is `round(W|cos| + H|sin|) x round(W|sin| + H|cos|)`, at
    /// least 1x1. Multiples of 90 degrees use exact trigonometric values so
    /// quarter turns are pure index permutations.
    pub fn new(src_w: usize, src_h: usize, degrees: f64) -> Self {
        let degrees = degrees.rem_euclid(360.0);
        let (sin, cos) = if degrees == 0.0 {
            (0.0, 1.0)
        } else if degrees == 90.0 {
            (1.0, 0.0)
        } else if degrees == 180.0 {
            (0.0, -1.0)
        } else if degrees == 270.0 {
            (-1.0, 0.0)
        } else {
            degrees.to_radians().sin_cos()
        };
        let (w, h) = (src_w as f64, src_h as f64);
        let dst_w = ((w * cos.abs() + h * sin.abs()).round() as usize).max(1);
        let dst_h = ((w * sin.abs() + h * cos.abs()).round() as usize).max(1);
        Self {
            src_w,
            src_h,
            dst_w,
            dst_h,
            degrees,
            cos,
            sin,
        }
    }

    pub fn degrees(&self) -> f64 {
        self.degrees
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.src_w, self.src_h)
    }

    /// Dimensions of the rotated canvas.
    pub fn canvas(&self) -> (usize, usize) {
        (self.dst_w, self.dst_h)
    }

    /// True when the rotation is a multiple of 90 degrees.
    pub fn is_quarter_turn(&self) -> bool {
        self.sin == 0.0 || self.cos == 0.0
    }

    /// Maps a source (unrotated) point into the rotated canvas.
    pub fn to_rotated(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let dx = x + 0.5 - self.src_w as f64 / 2.0;
        let dy = y + 0.5 - self.src_h as f64 / 2.0;
        let rx = dx * self.cos + dy * self.sin;
        let ry = -dx * self.sin + dy * self.cos;
        (
            rx + self.dst_w as f64 / 2.0 - 0.5,
            ry + self.dst_h as f64 / 2.0 - 0.5,
        )
    }

    /// Maps a rotated-canvas point back into the source frame.
    pub fn to_source(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let dx = x + 0.5 - self.dst_w as f64 / 2.0;
        let dy = y + 0.5 - self.dst_h as f64 / 2.0;
        let sx = dx * self.cos - dy * self.sin;
        let sy = dx * self.sin + dy * self.cos;
        (
            sx + self.src_w as f64 / 2.0 - 0.5,
            sy + self.src_h as f64 / 2.0 - 0.5,
        )
    }
}

/// Bilinear sample of `img` at index-space position `(x, y)`. Neighbours
/// outside the image contribute `fill`.
pub fn sample_bilinear(img: &RasterImage, x: f64, y: f64, fill: Rgb) -> Rgb {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let fetch = |xi: i64, yi: i64| -> Rgb {
        if xi < 0 || yi < 0 || xi >= w || yi >= h {
            fill
        } else {
            img.get(xi as usize, yi as usize)
        }
    };
    let (xi, yi) = (x0 as i64, y0 as i64);
    if fx == 0.0 && fy == 0.0 {
        return fetch(xi, yi);
    }
    let p00 = fetch(xi, yi);
    let p10 = fetch(xi + 1, yi);
    let p01 = fetch(xi, yi + 1);
    let p11 = fetch(xi + 1, yi + 1);
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
        let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Rotates `img` counter-clockwise by an integer number of degrees onto its
/// tight bounding canvas, with bilinear resampling. Canvas pixels whose
/// source lies outside the input take `fill`.
pub fn rotate(img: &RasterImage, degrees: i32, fill: Rgb) -> RasterImage {
    rotate_by(img, f64::from(degrees), fill)
}

/// [`rotate`] for arbitrary real angles.
pub fn rotate_by(img: &RasterImage, degrees: f64, fill: Rgb) -> RasterImage {
    let geom = RotationGeometry::new(img.width(), img.height(), degrees);
    let (w, h) = geom.canvas();
    RasterImage::from_fn(w, h, |x, y| rotated_pixel(img, &geom, x, y, fill)).expect("canvas is at least 1x1")
}

/// Pixel `(x, y)` of the rotated canvas described by `geom`, identical to
/// what [`rotate_by`] produces there.
#[inline]
pub fn rotated_pixel(img: &RasterImage, geom: &RotationGeometry, x: usize, y: usize, fill: Rgb) -> Rgb {
    let (sx, sy) = geom.to_source((x as f64, y as f64));
    if geom.is_quarter_turn() {
        img.get(sx.round() as usize, sy.round() as usize)
    } else {
        sample_bilinear(img, sx, sy, fill)
    }
}
