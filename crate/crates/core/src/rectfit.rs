//! Template extraction: sweep a fragment through integer rotations and keep
//! the largest axis-aligned rectangle that contains no background.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{crop, rotate, sample_bilinear, RasterImage, RectRegion, RotationGeometry, WHITE};
use crate::segmentation::{BinaryMask, Piece, DEFAULT_WHITE_CUTOFF};

/// Largest all-true axis-aligned rectangle in `mask`.
///
/// Uses the monotone-stack histogram scan, one row at a time, in
/// `O(width * height)`. Among rectangles of maximal area the widest wins,
/// then the smallest `(y, x)`.
pub fn largest_interior_rect(mask: &BinaryMask) -> Result<RectRegion> {
    let (w, h) = (mask.width(), mask.height());
    let mut heights = vec![0usize; w + 1];
    let mut stack: Vec<usize> = Vec::with_capacity(w + 1);
    let mut best: Option<RectRegion> = None;
    let better = |cand: &RectRegion, cur: &Option<RectRegion>| match cur {
        None => true,
        Some(b) => (cand.area(), cand.w, std::cmp::Reverse(cand.y), std::cmp::Reverse(cand.x))
            > (b.area(), b.w, std::cmp::Reverse(b.y), std::cmp::Reverse(b.x)),
    };
    for row in 0..h {
        for x in 0..w {
            heights[x] = if mask.get(x, row) { heights[x] + 1 } else { 0 };
        }
        // heights[w] stays 0 and flushes the stack.
        stack.clear();
        for x in 0..=w {
            while let Some(&top) = stack.last() {
                if heights[top] < heights[x] {
                    break;
                }
                stack.pop();
                let hgt = heights[top];
                if hgt == 0 {
                    continue;
                }
                let left = stack.last().map_or(0, |&s| s + 1);
                let cand = RectRegion::new(left, row + 1 - hgt, x - left, hgt);
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
            stack.push(x);
        }
    }
    best.ok_or(Error::EmptyMask)
}

/// Settings for [`best_template`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RectFitConfig {
    /// Rotation step in degrees; must divide 360.
    pub step: u32,
    /// Pixels whose resampled colour has `min(R, G, B) >= white_cutoff` are
    /// excluded from the template.
    pub white_cutoff: u8,
}

impl Default for RectFitConfig {
    fn default() -> Self {
        Self {
            step: 1,
            white_cutoff: DEFAULT_WHITE_CUTOFF,
        }
    }
}

/// The chosen rotation of a piece and the background-free rectangle cut from it.
#[derive(Clone, Debug)]
pub struct TemplateChoice {
    pub piece_id: String,
    pub piece_rotation: u32,
    /// Rectangle in the rotated piece canvas.
    pub rect: RectRegion,
    pub area: usize,
    pub template: RasterImage,
    /// Fragment centroid relative to the template's top-left, in the rotated
    /// canvas. For a bare template this is the template centre.
    pub anchor: (f64, f64),
}

impl TemplateChoice {
    /// Wraps an already-cut template; the anchor is its centre.
    pub fn from_template(piece_id: impl Into<String>, template: RasterImage) -> Self {
        let (w, h) = template.dimensions();
        Self {
            piece_id: piece_id.into(),
            piece_rotation: 0,
            rect: RectRegion::new(0, 0, w, h),
            area: w * h,
            anchor: ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0),
            template,
        }
    }
}

/// JSON record written next to an extracted template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub piece_id: String,
    pub piece_rotation: u32,
    pub rect: RectRegion,
    pub area: usize,
    pub anchor: (f64, f64),
}

impl From<&TemplateChoice> for TemplateRecord {
    fn from(c: &TemplateChoice) -> Self {
        Self {
            piece_id: c.piece_id.clone(),
            piece_rotation: c.piece_rotation,
            rect: c.rect,
            area: c.area,
            anchor: c.anchor,
        }
    }
}

pub(crate) fn check_step(step: u32) -> Result<()> {
    if step == 0 || step > 360 || 360 % step != 0 {
        return Err(Error::InvalidStep(step));
    }
    Ok(())
}

/// Rotates a fragment mask without letting background bleed in: a rotated
/// cell is set only when every source cell its bilinear sample touches is
/// set and the resampled colour is not background.
pub fn rotate_piece_mask(piece: &Piece, degrees: u32, white_cutoff: u8) -> BinaryMask {
    let mask = &piece.segment.mask;
    let geom = RotationGeometry::new(mask.width(), mask.height(), f64::from(degrees));
    let (w, h) = geom.canvas();
    let is_fragment = |px: [u8; 3]| px.iter().copied().min().unwrap_or(255) < white_cutoff;
    if geom.is_quarter_turn() {
        return BinaryMask::from_fn(w, h, |x, y| {
            let (sx, sy) = geom.to_source((x as f64, y as f64));
            let (sx, sy) = (sx.round() as usize, sy.round() as usize);
            mask.get(sx, sy) && is_fragment(piece.image.get(sx, sy))
        });
    }
    BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = geom.to_source((x as f64, y as f64));
        let (x0, y0) = (sx.floor() as i64, sy.floor() as i64);
        let xs: &[i64] = if sx.fract() == 0.0 { &[0] } else { &[0, 1] };
        let ys: &[i64] = if sy.fract() == 0.0 { &[0] } else { &[0, 1] };
        let covered = ys.iter().all(|&dy| xs.iter().all(|&dx| mask.get_or_false(x0 + dx, y0 + dy)));
        covered && is_fragment(sample_bilinear(&piece.image, sx, sy, WHITE))
    })
}

/// Sweeps every multiple of `cfg.step` in `[0, 360)` and returns the
/// rotation whose interior rectangle is largest (smallest rotation on ties),
/// with the template cut from the rotated piece image.
pub fn best_template(piece: &Piece, cfg: &RectFitConfig) -> Result<TemplateChoice> {
    check_step(cfg.step)?;
    if piece.segment.mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let rotations: Vec<u32> = (0..360).step_by(cfg.step as usize).collect();
    let best = rotations
        .par_iter()
        .map(|&deg| {
            let rotated = rotate_piece_mask(piece, deg, cfg.white_cutoff);
            (deg, largest_interior_rect(&rotated).ok())
        })
        .filter_map(|(deg, rect)| rect.map(|r| (deg, r)))
        .reduce_with(|a, b| {
            let ka = (a.1.area(), std::cmp::Reverse(a.0));
            let kb = (b.1.area(), std::cmp::Reverse(b.0));
            if kb > ka {
                b
            } else {
                a
            }
        })
        .ok_or(Error::EmptyMask)?;
    let (deg, rect) = best;
    let rotated = rotate(&piece.image, deg as i32, WHITE);
    let template = crop(&rotated, rect)?;
    let geom = RotationGeometry::new(piece.image.width(), piece.image.height(), f64::from(deg));
    let centroid = piece.segment.mask.centroid().ok_or(Error::EmptyMask)?;
    let (cx, cy) = geom.to_rotated(centroid);
    Ok(TemplateChoice {
        piece_id: piece.id.clone(),
        piece_rotation: deg,
        rect,
        area: rect.area(),
        template,
        anchor: (cx - rect.x as f64, cy - rect.y as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::{extract_segments, threshold_background};
    use proptest::prelude::*;

    /// Exhaustive search over every rectangle, with the same tie order.
    fn brute_force(mask: &BinaryMask) -> Option<RectRegion> {
        let (w, h) = (mask.width(), mask.height());
        let mut best: Option<RectRegion> = None;
        for y in 0..h {
            for x in 0..w {
                for hh in 1..=h - y {
                    for ww in 1..=w - x {
                        let ok = (y..y + hh).all(|yy| (x..x + ww).all(|xx| mask.get(xx, yy)));
                        if !ok {
                            break;
                        }
                        let c = RectRegion::new(x, y, ww, hh);
                        let key = |r: &RectRegion| (r.area(), r.w, std::cmp::Reverse(r.y), std::cmp::Reverse(r.x));
                        if best.map_or(true, |b| key(&c) > key(&b)) {
                            best = Some(c);
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn full_mask_is_whole_extent() {
        let m = BinaryMask::from_fn(7, 4, |_, _| true);
        assert_eq!(largest_interior_rect(&m).unwrap(), RectRegion::new(0, 0, 7, 4));
    }

    #[test]
    fn single_pixel() {
        let m = BinaryMask::from_fn(8, 9, |x, y| (x, y) == (3, 5));
        assert_eq!(largest_interior_rect(&m).unwrap(), RectRegion::new(3, 5, 1, 1));
    }

    #[test]
    fn empty_mask_errors() {
        let err = largest_interior_rect(&BinaryMask::new(4, 4)).unwrap_err();
        assert_eq!(err.to_string(), "empty mask");
    }

    #[test]
    fn ties_prefer_wider_then_upper_left() {
        // 2x3 block and 3x2 block of equal area
        let m = BinaryMask::from_fn(10, 10, |x, y| (x < 2 && y < 3) || ((5..8).contains(&x) && (6..8).contains(&y)));
        assert_eq!(largest_interior_rect(&m).unwrap(), RectRegion::new(5, 6, 3, 2));
        let m = BinaryMask::from_fn(10, 10, |x, y| (y == 7 && x < 3) || (y == 2 && (5..8).contains(&x)));
        assert_eq!(largest_interior_rect(&m).unwrap(), RectRegion::new(5, 2, 3, 1));
    }

    fn rect_piece(w: usize, h: usize, deg: f64) -> Piece {
        let solid = RasterImage::from_fn(w, h, |x, y| [(60 + x % 50) as u8, (80 + y % 40) as u8, 100]).unwrap();
        let rotated = crate::imagecore::rotate_by(&solid, deg, WHITE);
        let mut scan = RasterImage::filled(rotated.width() + 20, rotated.height() + 20, WHITE).unwrap();
        scan.blit(&rotated, 10, 10);
        let mask = threshold_background(&scan, DEFAULT_WHITE_CUTOFF);
        let seg = extract_segments(&mask, 1).remove(0);
        Piece::from_scan("p", &scan, seg).unwrap()
    }

    #[test]
    fn axis_aligned_piece_keeps_rotation_zero() {
        let piece = rect_piece(60, 30, 0.0);
        let choice = best_template(&piece, &RectFitConfig::default()).unwrap();
        assert_eq!(choice.piece_rotation, 0);
        assert_eq!(choice.rect, RectRegion::new(0, 0, 60, 30));
        assert_eq!(choice.area, 1800);
        assert_eq!(choice.anchor, (29.5, 14.5));
    }

    #[test]
    fn tilted_piece_is_straightened() {
        let (w, h) = (400, 200);
        let piece = rect_piece(w, h, 30.0);
        let choice = best_template(&piece, &RectFitConfig::default()).unwrap();
        // Any quarter turn of the straightened piece is an equally good answer.
        assert_eq!(choice.piece_rotation % 90, 60, "rotation {}", choice.piece_rotation);
        let ratio = choice.area as f64 / (w * h) as f64;
        assert!(ratio >= 0.98 && ratio <= 1.0, "area ratio {ratio}");
        let remask = threshold_background(&choice.template, DEFAULT_WHITE_CUTOFF);
        assert_eq!(remask.count(), choice.area);
    }

    #[test]
    fn finer_sweep_never_loses() {
        let piece = rect_piece(90, 40, 17.0);
        let fine = best_template(&piece, &RectFitConfig { step: 1, ..Default::default() }).unwrap();
        let coarse = best_template(&piece, &RectFitConfig { step: 15, ..Default::default() }).unwrap();
        assert!(fine.area >= coarse.area);
    }

    #[test]
    fn bad_step_is_rejected() {
        let piece = rect_piece(10, 10, 0.0);
        assert!(best_template(&piece, &RectFitConfig { step: 7, ..Default::default() }).is_err());
    }

    #[test]
    fn closed_holes_stay_out_of_the_template() {
        let mut piece = rect_piece(50, 50, 0.0);
        piece.image.set(25, 25, WHITE);
        let choice = best_template(&piece, &RectFitConfig::default()).unwrap();
        let remask = threshold_background(&choice.template, DEFAULT_WHITE_CUTOFF);
        assert_eq!(remask.count(), choice.area);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn histogram_scan_matches_exhaustive_search(w in 1usize..=16, h in 1usize..=16, density in 0.3f64..1.0, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density));
            let expected = brute_force(&m);
            match expected {
                None => prop_assert!(largest_interior_rect(&m).is_err()),
                Some(e) => {
                    let got = largest_interior_rect(&m).unwrap();
                    prop_assert_eq!(got, e);
                }
            }
        }

        #[test]
        fn sweep_returns_global_argmax(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let piece = rect_piece(rng.gen_range(10..40), rng.gen_range(10..40), rng.gen_range(0.0..360.0));
            let cfg = RectFitConfig { step: 10, ..Default::default() };
            let choice = best_template(&piece, &cfg).unwrap();
            for deg in (0..360).step_by(10) {
                let m = rotate_piece_mask(&piece, deg, cfg.white_cutoff);
                if let Ok(r) = largest_interior_rect(&m) {
                    prop_assert!(choice.area >= r.area());
                }
            }
        }
    }
}
