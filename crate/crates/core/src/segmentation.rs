//! Fragment extraction from scans of pieces laid on a white background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{crop, RasterImage, RectRegion, WHITE};

pub const DEFAULT_WHITE_CUTOFF: u8 = 245;
pub const DEFAULT_MIN_AREA: usize = 400;
pub const DEFAULT_CLEAN_RADIUS: usize = 1;

/// Row-major boolean grid; `true` marks fragment pixels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for y in 0..self.height {
                let row: String = (0..self.width).map(|x| if self.get(x, y) { '#' } else { '.' }).collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "bit count does not match width x height",
            });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
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
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but `false` outside the grid.
    #[inline]
    pub fn get_or_false(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Index-space centroid of the true cells, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

/// Marks a pixel as background iff `min(R, G, B) >= white_cutoff`.
pub fn threshold_background(img: &RasterImage, white_cutoff: u8) -> BinaryMask {
    let bits = img
        .pixels()
        .iter()
        .map(|p| p.iter().copied().min().unwrap_or(255) < white_cutoff)
        .collect();
    BinaryMask {
        width: img.width(),
        height: img.height(),
        bits,
    }
}

/// One connected fragment: a mask cropped to its tight bounding box plus the
/// box's offset in the source scan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub mask: BinaryMask,
    pub origin: (usize, usize),
    pub area: usize,
}

impl Segment {
    pub fn bounding_box(&self) -> RectRegion {
        RectRegion::new(self.origin.0, self.origin.1, self.mask.width(), self.mask.height())
    }
}

/// Splits `mask` into 8-connected components, drops those smaller than
/// `min_area`, and sorts the rest by area (largest first), then by origin
/// `(y, x)`.
pub fn extract_segments(mask: &BinaryMask, min_area: usize) -> Vec<Segment> {
    let (w, h) = (mask.width, mask.height);
    let mut seen = vec![false; w * h];
    let mut segments = Vec::new();
    let mut stack = Vec::new();
    let mut members = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        members.clear();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(idx) = stack.pop() {
            let (x, y) = (idx % w, idx / w);
            members.push(idx);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if mask.bits[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }
        if members.len() < min_area.max(1) {
            continue;
        }
        let mut local = BinaryMask::new(x1 - x0 + 1, y1 - y0 + 1);
        for &idx in &members {
            local.set(idx % w - x0, idx / w - y0, true);
        }
        segments.push(Segment {
            mask: local,
            origin: (x0, y0),
            area: members.len(),
        });
    }
    segments.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.origin.1.cmp(&b.origin.1))
            .then(a.origin.0.cmp(&b.origin.0))
    });
    segments
}

fn sweep(mask: &BinaryMask, radius: usize, horizontal: bool, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let r = radius as i64;
    BinaryMask::from_fn(w, h, |x, y| {
        let hit = (-r..=r).any(|d| {
            let (nx, ny) = if horizontal { (x as i64 + d, y as i64) } else { (x as i64, y as i64 + d) };
            let inside = nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64;
            if dilate {
                inside && mask.get(nx as usize, ny as usize)
            } else {
                // Erosion treats the outside as foreground so closing stays extensive.
                inside && !mask.get(nx as usize, ny as usize)
            }
        });
        if dilate {
            hit
        } else {
            !hit
        }
    })
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    sweep(&sweep(mask, radius, true, true), radius, false, true)
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    sweep(&sweep(mask, radius, true, false), radius, false, false)
}

/// Morphological closing with a `(2 radius + 1)` square; radius 0 is the
/// identity.
pub fn clean_mask(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    erode(&dilate(mask, radius), radius)
}

/// Segmentation settings for a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub white_cutoff: u8,
    pub min_area: usize,
    pub clean_radius: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            white_cutoff: DEFAULT_WHITE_CUTOFF,
            min_area: DEFAULT_MIN_AREA,
            clean_radius: DEFAULT_CLEAN_RADIUS,
        }
    }
}

/// A segmented fragment together with its pixels.
///
/// `image` is the scan cropped to the segment's bounding box with every
/// pixel outside the mask painted white.
#[derive(Clone, Debug)]
pub struct Piece {
    pub id: String,
    pub segment: Segment,
    pub image: RasterImage,
}

impl Piece {
    pub fn from_scan(id: impl Into<String>, scan: &RasterImage, segment: Segment) -> Result<Self> {
        let mut image = crop(scan, segment.bounding_box())?;
        for y in 0..image.height() {
            for x in 0..image.width() {
                if !segment.mask.get(x, y) {
                    image.set(x, y, WHITE);
                }
            }
        }
        Ok(Self {
            id: id.into(),
            segment,
            image,
        })
    }

    /// Builds a piece from an already-cropped image and mask.
    pub fn from_parts(id: impl Into<String>, image: RasterImage, mask: BinaryMask) -> Result<Self> {
        if image.dimensions() != (mask.width(), mask.height()) {
            return Err(Error::Mismatch(format!(
                "image {}x{} vs mask {}x{}",
                image.width(),
                image.height(),
                mask.width(),
                mask.height()
            )));
        }
        let area = mask.count();
        if area == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            id: id.into(),
            segment: Segment {
                mask,
                origin: (0, 0),
                area,
            },
            image,
        })
    }
}

/// Threshold, close, and split one scan into pieces. With several segments
/// the ids are `{scan_id}_{k}` in segment order; a single segment keeps
/// `scan_id`.
pub fn segment_scan(scan_id: &str, scan: &RasterImage, cfg: &SegmentConfig) -> Result<Vec<Piece>> {
    let mask = clean_mask(&threshold_background(scan, cfg.white_cutoff), cfg.clean_radius);
    let segments = extract_segments(&mask, cfg.min_area);
    let single = segments.len() == 1;
    segments
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let id = if single { scan_id.to_string() } else { format!("{scan_id}_{k}") };
            Piece::from_scan(id, scan, s)
        })
        .collect()
}
