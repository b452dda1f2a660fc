use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit RGB triple.
pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
pub const RED: Rgb = [255, 0, 0];

/// Owned row-major RGB raster. Both dimensions are at least one pixel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "both dimensions must be positive",
        });
    }
    Ok(())
}

impl RasterImage {
    /// Image of the given size filled with one colour.
    pub fn filled(width: usize, height: usize, fill: Rgb) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            pixels: vec![fill; width * height],
        })
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "pixel count does not match width x height",
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
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
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    /// Pixel at `(x, y)`. Panics when out of bounds.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.pixels[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[Rgb] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn full_region(&self) -> RectRegion {
        RectRegion::new(0, 0, self.width, self.height)
    }

    /// Halves both dimensions (rounding down, at least one pixel) by
    /// averaging 2x2 blocks per channel.
    pub fn downsample2(&self) -> RasterImage {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        RasterImage::from_fn(w, h, |x, y| {
            let xs = [(2 * x).min(self.width - 1), (2 * x + 1).min(self.width - 1)];
            let ys = [(2 * y).min(self.height - 1), (2 * y + 1).min(self.height - 1)];
            let mut out = [0u8; 3];
            for c in 0..3 {
                let s: u32 = ys
                    .iter()
                    .flat_map(|&yy| xs.iter().map(move |&xx| (xx, yy)))
                    .map(|(xx, yy)| u32::from(self.get(xx, yy)[c]))
                    .sum();
                out[c] = ((s + 2) / 4) as u8;
            }
            out
        })
        .expect("at least 1x1")
    }

    /// Copies `src` into this image with its top-left at `(x, y)`, clipping
    /// anything that falls outside.
    pub fn blit(&mut self, src: &RasterImage, x: usize, y: usize) {
        for sy in 0..src.height {
            let ty = y + sy;
            if ty >= self.height {
                break;
            }
            for sx in 0..src.width {
                let tx = x + sx;
                if tx >= self.width {
                    break;
                }
                self.pixels[ty * self.width + tx] = src.pixels[sy * src.width + sx];
            }
        }
    }
}

/// Axis-aligned rectangle addressed by its top-left corner and size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RectRegion {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RectRegion {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Checks that the region is non-empty and fits inside a `width x height` image.
    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidDimensions {
                width: self.w,
                height: self.h,
                reason: "region must be non-empty",
            });
        }
        if self.right() > width {
            return Err(Error::OutOfBounds {
                coordinate: "x + w",
                value: self.right(),
                limit: width,
            });
        }
        if self.bottom() > height {
            return Err(Error::OutOfBounds {
                coordinate: "y + h",
                value: self.bottom(),
                limit: height,
            });
        }
        Ok(())
    }
}

/// Copies the addressed sub-rectangle out of `img`.
pub fn crop(img: &RasterImage, r: RectRegion) -> Result<RasterImage> {
    r.check_within(img.width, img.height)?;
    let mut pixels = Vec::with_capacity(r.area());
    for y in r.y..r.bottom() {
        pixels.extend_from_slice(&img.row(y)[r.x..r.right()]);
    }
    RasterImage::from_pixels(r.w, r.h, pixels)
}
