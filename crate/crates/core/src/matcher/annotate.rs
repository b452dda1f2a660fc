use crate::error::Result;
use crate::imagecore::{RasterImage, RectRegion, Rgb};
use crate::matcher::MatchResult;

/// Outline thickness in pixels.
pub const BOX_THICKNESS: usize = 3;

/// Draws a box of [`BOX_THICKNESS`] pixels just outside the matched
/// template rectangle (clipped at the image border), leaving the template
/// area itself untouched.
pub fn annotate(image: &RasterImage, result: &MatchResult, template_dims: (usize, usize), color: Rgb) -> Result<RasterImage> {
    let rect = RectRegion::new(result.x, result.y, template_dims.0, template_dims.1);
    rect.check_within(image.width(), image.height())?;
    let mut out = image.clone();
    let t = BOX_THICKNESS;
    let x0 = rect.x.saturating_sub(t);
    let y0 = rect.y.saturating_sub(t);
    let x1 = (rect.right() + t).min(image.width());
    let y1 = (rect.bottom() + t).min(image.height());
    for y in y0..y1 {
        for x in x0..x1 {
            if !rect.contains(x, y) {
                out.set(x, y, color);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::{RED, WHITE};

    fn result_at(x: usize, y: usize) -> MatchResult {
        MatchResult {
            piece_id: "p".into(),
            ground_truth_id: "g".into(),
            rotation: 0,
            x,
            y,
            match_value: 1.0,
            unrotated_center_x: 0.0,
            unrotated_center_y: 0.0,
        }
    }

    #[test]
    fn changed_pixels_form_the_outline() {
        let img = RasterImage::filled(50, 40, WHITE).unwrap();
        let out = annotate(&img, &result_at(10, 8), (12, 9), RED).unwrap();
        for y in 0..40 {
            for x in 0..50 {
                let in_box = (7..25).contains(&x) && (5..20).contains(&y);
                let in_rect = (10..22).contains(&x) && (8..17).contains(&y);
                let changed = out.get(x, y) != img.get(x, y);
                assert_eq!(changed, in_box && !in_rect, "({x},{y})");
            }
        }
    }

    #[test]
    fn disjoint_annotations_commute() {
        let img = RasterImage::from_fn(60, 60, |x, y| [x as u8, y as u8, 7]).unwrap();
        let (a, b) = (result_at(5, 5), result_at(35, 30));
        let ab = annotate(&annotate(&img, &a, (10, 10), RED).unwrap(), &b, (10, 10), RED).unwrap();
        let ba = annotate(&annotate(&img, &b, (10, 10), RED).unwrap(), &a, (10, 10), RED).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn out_of_bounds_errors() {
        let img = RasterImage::filled(20, 20, WHITE).unwrap();
        assert!(annotate(&img, &result_at(15, 0), (10, 5), RED).is_err());
    }
}
