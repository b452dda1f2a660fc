//! Regular (R) versus serial-number (S) piece classification.
//!
//! The baseline is a transparent geometric heuristic: serial numbers are
//! rows of similar dark glyphs at a steady pitch, which ornament and
//! portrait regions rarely produce. Anything implementing
//! [`PieceClassifier`] (for example a learned model) can replace it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{to_gray, GrayImage, RectRegion};
use crate::segmentation::{extract_segments, BinaryMask, Piece};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PieceClass {
    /// Regular piece, sent to automatic matching.
    R,
    /// Piece carrying serial-number glyphs, set aside for manual placement.
    S,
}

/// Classifier verdict for one piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceLabel {
    pub piece_id: String,
    pub label: PieceClass,
    /// Confidence that the piece carries a serial number, in `[0, 1]`.
    pub confidence: f64,
    /// Glyph boxes (piece-image coordinates) supporting an `S` verdict.
    pub evidence: Vec<RectRegion>,
}

/// Anything that can sort pieces into R and S.
pub trait PieceClassifier: Sync {
    fn classify(&self, piece: &Piece) -> PieceLabel;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphParams {
    /// Pixels darker than this luminance count as ink.
    pub ink_threshold: f64,
    /// Accepted glyph heights, inclusive.
    pub min_height: usize,
    pub max_height: usize,
    /// Accepted width/height ratios, inclusive.
    pub min_aspect: f64,
    pub max_aspect: f64,
    /// Glyphs needed in one row for an `S` verdict.
    pub min_glyphs: usize,
    /// Largest spread of centre heights, relative to the median glyph height.
    pub max_center_spread: f64,
    /// Largest coefficient of variation of the horizontal pitch.
    pub max_pitch_cv: f64,
    /// Largest gap between neighbouring glyph centres, relative to the
    /// median glyph height; wider gaps break a row.
    pub max_pitch_ratio: f64,
    /// Row length at which confidence saturates.
    pub saturation: usize,
}

impl Default for GlyphParams {
    fn default() -> Self {
        Self {
            ink_threshold: 0.3,
            min_height: 8,
            max_height: 64,
            min_aspect: 0.3,
            max_aspect: 1.2,
            min_glyphs: 3,
            max_center_spread: 0.3,
            max_pitch_cv: 0.35,
            max_pitch_ratio: 2.5,
            saturation: 8,
        }
    }
}

impl GlyphParams {
    /// The same heuristic for a piece magnified `factor` times.
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            min_height: self.min_height * factor,
            max_height: self.max_height * factor,
            ..self.clone()
        }
    }
}

/// The default classifier: looks for a row of evenly spaced glyphs.
#[derive(Clone, Debug, Default)]
pub struct GlyphRowClassifier {
    pub params: GlyphParams,
}

impl GlyphRowClassifier {
    pub fn new(params: GlyphParams) -> Self {
        Self { params }
    }
}

impl PieceClassifier for GlyphRowClassifier {
    fn classify(&self, piece: &Piece) -> PieceLabel {
        classify(piece, &self.params)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn center(r: &RectRegion) -> (f64, f64) {
    (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0)
}

/// Dark, glyph-shaped components inside the piece mask.
pub fn glyph_boxes(piece: &Piece, p: &GlyphParams) -> Vec<RectRegion> {
    let gray: GrayImage = to_gray(&piece.image);
    let mask = &piece.segment.mask;
    let ink = BinaryMask::from_fn(gray.width(), gray.height(), |x, y| mask.get(x, y) && gray.get(x, y) < p.ink_threshold);
    let mut boxes: Vec<RectRegion> = extract_segments(&ink, 1)
        .iter()
        .map(|s| s.bounding_box())
        .filter(|b| {
            let aspect = b.w as f64 / b.h as f64;
            (p.min_height..=p.max_height).contains(&b.h) && aspect >= p.min_aspect && aspect <= p.max_aspect
        })
        .collect();
    boxes.sort_by_key(|b| (b.x, b.y));
    boxes
}

/// Longest run of glyphs that share a baseline and a steady pitch.
fn best_row(boxes: &[RectRegion], p: &GlyphParams) -> Vec<RectRegion> {
    let mut best: Vec<RectRegion> = Vec::new();
    for seed in boxes {
        let (_, cy) = center(seed);
        let h = seed.h as f64;
        // Same line and a similar size as the seed, ordered left to right.
        let line: Vec<RectRegion> = boxes
            .iter()
            .filter(|b| (center(b).1 - cy).abs() <= p.max_center_spread * h / 2.0)
            .filter(|b| (b.h as f64) >= 0.7 * h && (b.h as f64) <= h / 0.7)
            .copied()
            .collect();
        // Contiguous runs along the line, longest first.
        for len in (2..=line.len()).rev() {
            if len <= best.len() {
                break;
            }
            if let Some(run) = line.windows(len).find(|w| is_row(w, p)) {
                best = run.to_vec();
                break;
            }
        }
    }
    best
}

fn is_row(run: &[RectRegion], p: &GlyphParams) -> bool {
    let heights = median(run.iter().map(|b| b.h as f64).collect());
    let ys: Vec<f64> = run.iter().map(|b| center(b).1).collect();
    let spread = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
    if spread > p.max_center_spread * heights {
        return false;
    }
    let gaps: Vec<f64> = run.windows(2).map(|w| center(&w[1]).0 - center(&w[0]).0).collect();
    if gaps.iter().any(|&g| g <= 0.0 || g > p.max_pitch_ratio * heights) {
        return false;
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    var.sqrt() / mean <= p.max_pitch_cv
}

/// Labels a piece `S` when at least `min_glyphs` glyphs form one row.
/// Confidence is `min(1, row length / saturation)`, counting only rows of
/// two or more glyphs; evidence lists the row's boxes for `S` verdicts.
pub fn classify(piece: &Piece, params: &GlyphParams) -> PieceLabel {
    let row = best_row(&glyph_boxes(piece, params), params);
    let is_serial = row.len() >= params.min_glyphs.max(1);
    let confidence = (row.len() as f64 / params.saturation.max(1) as f64).min(1.0);
    PieceLabel {
        piece_id: piece.id.clone(),
        label: if is_serial { PieceClass::S } else { PieceClass::R },
        confidence,
        evidence: if is_serial { row } else { Vec::new() },
    }
}

/// Stable partition into (regular, serial). Labels must line up with the
/// pieces one for one.
pub fn route<P: AsRef<Piece>>(pieces: Vec<P>, labels: &[PieceLabel]) -> Result<(Vec<P>, Vec<P>)> {
    if pieces.len() != labels.len() {
        return Err(Error::Mismatch(format!("{} pieces but {} labels", pieces.len(), labels.len())));
    }
    let mut regular = Vec::new();
    let mut serial = Vec::new();
    for (piece, label) in pieces.into_iter().zip(labels) {
        if piece.as_ref().id != label.piece_id {
            return Err(Error::Mismatch(format!(
                "piece {} labelled as {}",
                piece.as_ref().id,
                label.piece_id
            )));
        }
        match label.label {
            PieceClass::R => regular.push(piece),
            PieceClass::S => serial.push(piece),
        }
    }
    Ok((regular, serial))
}

impl AsRef<Piece> for Piece {
    fn as_ref(&self) -> &Piece {
        self
    }
}
