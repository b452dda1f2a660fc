//! Synthetic banknote faces and glyph rendering for tests and demos.
//!
//! Faces are smooth, non-repeating colour fields: a random sum of plane
//! waves plus Gaussian blobs, squashed into a mid-tone band so that no
//! pixel reads as white background or as dark print.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imagecore::{RasterImage, Rgb};

/// Lowest channel value a synthetic face uses.
pub const FACE_MIN: f64 = 80.0;
/// Highest channel value a synthetic face uses.
pub const FACE_MAX: f64 = 225.0;

const WAVES: usize = 28;
const BLOBS_PER_MEGAPIXEL: f64 = 60.0;

struct Wave {
    fx: f64,
    fy: f64,
    phase: f64,
    gain: [f64; 3],
}

struct Blob {
    x: f64,
    y: f64,
    inv_two_sigma_sq: f64,
    reach: f64,
    gain: [f64; 3],
}

/// A textured `width x height` face, fully determined by `seed`.
pub fn synthetic_note(width: usize, height: usize, seed: u64) -> Result<RasterImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<Wave> = (0..WAVES)
        .map(|_| {
            // Wavelengths spread log-uniformly from fine grain to broad wash.
            let wavelength = 6.0 * (40.0f64).powf(rng.gen::<f64>());
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let k = std::f64::consts::TAU / wavelength;
            let amp = (wavelength / 240.0).sqrt().clamp(0.25, 1.0);
            Wave {
                fx: k * angle.cos(),
                fy: k * angle.sin(),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
                gain: [0, 1, 2].map(|_| amp * rng.gen_range(-1.0..1.0)),
            }
        })
        .collect();
    let n_blobs = ((width * height) as f64 / 1e6 * BLOBS_PER_MEGAPIXEL).ceil() as usize;
    let blobs: Vec<Blob> = (0..n_blobs)
        .map(|_| {
            let sigma = rng.gen_range(6.0..40.0);
            Blob {
                x: rng.gen_range(0.0..width as f64),
                y: rng.gen_range(0.0..height as f64),
                inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                reach: 3.0 * sigma,
                gain: [0, 1, 2].map(|_| rng.gen_range(-2.5..2.5)),
            }
        })
        .collect();

    let mut field = vec![[0.0f64; 3]; width * height];
    for (y, row) in field.chunks_mut(width).enumerate() {
        for (x, px) in row.iter_mut().enumerate() {
            for w in &waves {
                let s = (w.fx * x as f64 + w.fy * y as f64 + w.phase).sin();
                for c in 0..3 {
                    px[c] += w.gain[c] * s;
                }
            }
        }
    }
    for b in &blobs {
        let x0 = (b.x - b.reach).max(0.0) as usize;
        let x1 = ((b.x + b.reach).ceil() as usize).min(width);
        let y0 = (b.y - b.reach).max(0.0) as usize;
        let y1 = ((b.y + b.reach).ceil() as usize).min(height);
        for y in y0..y1 {
            for x in x0..x1 {
                let d2 = (x as f64 - b.x).powi(2) + (y as f64 - b.y).powi(2);
                let g = (-d2 * b.inv_two_sigma_sq).exp();
                let px = &mut field[y * width + x];
                for c in 0..3 {
                    px[c] += b.gain[c] * g;
                }
            }
        }
    }

    let mid = (FACE_MIN + FACE_MAX) / 2.0;
    let half = (FACE_MAX - FACE_MIN) / 2.0;
    let pixels = field
        .iter()
        .map(|v| v.map(|f| (mid + half * (f / 2.5).tanh()).round() as u8))
        .collect();
    RasterImage::from_pixels(width, height, pixels)
}

/// 5x7 bitmaps for the digits 0-9, one row per byte, most significant of
/// the low five bits leftmost.
const DIGITS: [[u8; 7]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

/// Glyph cell width in font units (5 columns plus one of spacing).
pub const GLYPH_PITCH: usize = 6;
/// Glyph height in font units.
pub const GLYPH_HEIGHT: usize = 7;

/// Draws `digits` as a monospaced row with its top-left at `(x, y)`, each
/// font unit `scale` pixels square. Non-digit characters leave a gap.
/// Anything falling outside the image is clipped.
pub fn render_digits(img: &mut RasterImage, x: usize, y: usize, digits: &str, scale: usize, ink: Rgb) {
    for (i, ch) in digits.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        let left = x + i * GLYPH_PITCH * scale;
        for (r, bits) in DIGITS[d as usize].iter().enumerate() {
            for c in 0..5 {
                if bits & (0x10 >> c) == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let (px, py) = (left + c * scale + dx, y + r * scale + dy);
                        if px < img.width() && py < img.height() {
                            img.set(px, py, ink);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{BLACK, WHITE};

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = synthetic_note(120, 60, 7).unwrap();
        assert_eq!(a, synthetic_note(120, 60, 7).unwrap());
        assert_ne!(a, synthetic_note(120, 60, 8).unwrap());
    }

    #[test]
    fn stays_in_the_mid_tone_band() {
        let img = synthetic_note(300, 150, 1).unwrap();
        for p in img.pixels() {
            for &c in p {
                assert!(f64::from(c) >= FACE_MIN && f64::from(c) <= FACE_MAX);
            }
        }
        // Texture, not a flat fill.
        let distinct: std::collections::HashSet<_> = img.pixels().iter().collect();
        assert!(distinct.len() > 1000);
    }

    #[test]
    fn digit_one_has_expected_ink() {
        let mut img = RasterImage::filled(6, 7, WHITE).unwrap();
        render_digits(&mut img, 0, 0, "1", 1, BLACK);
        let ink = img.pixels().iter().filter(|p| **p == BLACK).count();
        let expected: u32 = DIGITS[1].iter().map(|b| b.count_ones()).sum();
        assert_eq!(ink, expected as usize);
        assert_eq!(img.get(2, 0), BLACK);
        assert_eq!(img.get(0, 0), WHITE);
    }

    #[test]
    fn scaled_digits_are_clipped() {
        let mut img = RasterImage::filled(20, 10, WHITE).unwrap();
        render_digits(&mut img, 15, 5, "88", 2, BLACK);
        assert!(img.pixels().iter().any(|p| *p == BLACK));
    }
}
