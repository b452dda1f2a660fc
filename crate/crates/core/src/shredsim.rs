//! Synthetic shredder with a ground-truth oracle.
//!
//! A face is cut into vertical strips whose boundaries are jittered
//! polylines, and each strip is cut crosswise by more jittered polylines.
//! Every piece is rotated by a random angle onto its own white scan. The
//! oracle keeps the exact piece polygon, so truth does not depend on the
//! raster resolution.
//!
//! Polygon vertices are continuous coordinates (pixel `(i, j)` covers
//! `[i, i+1] x [j, j+1]`); centres are reported in pixel-index space like
//! every other point in the crate (continuous minus one half).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{sample_bilinear, RasterImage, WHITE};
use crate::matcher::MatchResult;
use crate::segmentation::BinaryMask;

/// Smallest white border around a piece on its scan.
pub const MIN_MARGIN: usize = 10;
/// Distance between jitter vertices along a cut.
const VERTEX_SPACING: f64 = 16.0;

/// Shredder settings. Ranges are inclusive `(min, max)` in pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShredSpec {
    pub strip_width_range: (f64, f64),
    /// Each cut vertex moves by up to this many pixels.
    pub cut_jitter: f64,
    pub piece_length_range: (f64, f64),
    pub seed: u64,
    /// White border around each piece on its scan; at least [`MIN_MARGIN`].
    pub margin: usize,
}

impl Default for ShredSpec {
    fn default() -> Self {
        Self {
            strip_width_range: (200.0, 257.0),
            cut_jitter: 4.0,
            piece_length_range: (180.0, 220.0),
            seed: 0,
            margin: 16,
        }
    }
}

impl ShredSpec {
    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, (lo, hi)) in [("strip width", self.strip_width_range), ("piece length", self.piece_length_range)] {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || lo > hi {
                return bad(format!("{name} range ({lo}, {hi}) must satisfy 0 < min <= max"));
            }
        }
        if !self.cut_jitter.is_finite() || self.cut_jitter < 0.0 {
            return bad(format!("cut jitter {} must be >= 0", self.cut_jitter));
        }
        let smallest = self.strip_width_range.0.min(self.piece_length_range.0);
        if self.cut_jitter > smallest / 4.0 {
            return bad(format!("cut jitter {} too large for pieces of {smallest} px", self.cut_jitter));
        }
        if self.margin < MIN_MARGIN {
            return bad(format!("margin {} below {MIN_MARGIN}", self.margin));
        }
        if (width as f64) < self.strip_width_range.0 || (height as f64) < self.piece_length_range.0 {
            return bad(format!("{width}x{height} image is smaller than one piece"));
        }
        Ok(())
    }
}

/// Truth about one piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub piece_id: String,
    pub ground_truth_id: String,
    /// Piece outline in the unrotated face, continuous coordinates,
    /// counter-clockwise on screen.
    pub polygon: Vec<(f64, f64)>,
    /// Area centroid of `polygon`, in pixel-index space.
    pub center: (f64, f64),
    /// Counter-clockwise angle the piece was turned by on its scan.
    pub rotation: f64,
    /// Continuous scan position of the rotated centroid.
    pub scan_center: (f64, f64),
    pub scan_width: usize,
    pub scan_height: usize,
}

impl OracleRecord {
    /// Shoelace area of the polygon.
    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon)
    }

    /// Maps a face point (continuous) onto the scan (continuous).
    pub fn to_scan(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let (dx, dy) = (x - self.center.0 - 0.5, y - self.center.1 - 0.5);
        (self.scan_center.0 + dx * c + dy * s, self.scan_center.1 - dx * s + dy * c)
    }

    /// Maps a scan point (continuous) back onto the face (continuous).
    pub fn to_face(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let (dx, dy) = (x - self.scan_center.0, y - self.scan_center.1);
        (self.center.0 + 0.5 + dx * c - dy * s, self.center.1 + 0.5 + dx * s + dy * c)
    }

    /// Scan pixels whose centres fall inside the rotated polygon.
    pub fn scan_mask(&self) -> BinaryMask {
        BinaryMask::from_fn(self.scan_width, self.scan_height, |x, y| {
            point_in_polygon(self.to_face((x as f64 + 0.5, y as f64 + 0.5)), &self.polygon)
        })
    }
}

/// One shredded piece: its scan and its truth.
#[derive(Clone, Debug, PartialEq)]
pub struct ShredPiece {
    pub scan: RasterImage,
    pub oracle: OracleRecord,
}

/// Both faces of one congruently cut piece.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSidedPiece {
    pub front: ShredPiece,
    pub back: ShredPiece,
}

pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() / 2.0
}

fn polygon_centroid(poly: &[(f64, f64)]) -> (f64, f64) {
    let n = poly.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let cross = p.0 * q.1 - q.0 * p.1;
        a += cross;
        cx += (p.0 + q.0) * cross;
        cy += (p.1 + q.1) * cross;
    }
    (cx / (3.0 * a), cy / (3.0 * a))
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon((x, y): (f64, f64), poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.1 > y) != (b.1 > y) && x < (b.0 - a.0) * (y - a.1) / (b.1 - a.1) + a.0 {
            inside = !inside;
        }
    }
    inside
}

/// A cut: a function `offset(t)` given by vertices at increasing `t`,
/// linear in between. Vertical boundaries are `x(y)`, crosswise cuts `y(x)`.
#[derive(Clone, Debug)]
struct Cut {
    knots: Vec<(f64, f64)>,
}

impl Cut {
    fn straight(offset: f64, len: f64) -> Self {
        Self {
            knots: vec![(0.0, offset), (len, offset)],
        }
    }

    fn jittered(offset: f64, len: f64, jitter: f64, rng: &mut ChaCha8Rng) -> Self {
        let segs = (len / VERTEX_SPACING).ceil().max(1.0) as usize;
        let knots = (0..=segs)
            .map(|k| {
                let j = if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
                (len * k as f64 / segs as f64, offset + j)
            })
            .collect();
        Self { knots }
    }

    fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|p| p.0 <= t).clamp(1, k.len() - 1);
        let (a, b) = (k[i - 1], k[i]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    fn interior(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots.iter().copied().filter(move |p| p.0 > lo && p.0 < hi)
    }
}

/// Where vertical boundary `v` (x = v(y)) meets crosswise cut `h` (y = h(x)).
fn intersect(v: &Cut, h: &Cut) -> (f64, f64) {
    let mut y = h.eval(v.eval(h.knots[0].1));
    for _ in 0..100 {
        let x = v.eval(y);
        let ny = h.eval(x);
        if (ny - y).abs() < 1e-13 {
            return (x, ny);
        }
        y = ny;
    }
    (v.eval(y), y)
}

/// Nominal cut positions: `round(len / mean)` equal parts, each inner
/// offset perturbed while every part stays inside `range`.
fn partition(len: f64, range: (f64, f64), rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mean = (range.0 + range.1) / 2.0;
    let n = ((len / mean).round() as usize).max(1);
    let nominal = len / n as f64;
    let slack = ((nominal - range.0).min(range.1 - nominal) / 2.0).max(0.0);
    (0..=n)
        .map(|k| {
            let base = len * k as f64 / n as f64;
            if k == 0 || k == n || slack == 0.0 {
                base
            } else {
                base + rng.gen_range(-slack..=slack)
            }
        })
        .collect()
}

struct Layout {
    width: f64,
    bounds: Vec<Cut>,
    cuts: Vec<Vec<Cut>>,
}

impl Layout {
    fn new(width: usize, height: usize, spec: &ShredSpec, rng: &mut ChaCha8Rng) -> Self {
        let (w, h) = (width as f64, height as f64);
        let xs = partition(w, spec.strip_width_range, rng);
        let last = xs.len() - 1;
        let bounds: Vec<Cut> = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                if k == 0 || k == last {
                    Cut::straight(x, h)
                } else {
                    Cut::jittered(x, h, spec.cut_jitter, rng)
                }
            })
            .collect();
        let cuts = (0..last)
            .map(|_| {
                let ys = partition(h, spec.piece_length_range, rng);
                let last = ys.len() - 1;
                ys.iter()
                    .enumerate()
                    .map(|(k, &y)| {
                        if k == 0 || k == last {
                            Cut::straight(y, w)
                        } else {
                            Cut::jittered(y, w, spec.cut_jitter, rng)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { width: w, bounds, cuts }
    }

    fn pieces(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cuts.iter().enumerate().flat_map(|(i, c)| (0..c.len() - 1).map(move |j| (i, j)))
    }

    /// Piece containing continuous point `(x, y)`.
    fn locate(&self, (x, y): (f64, f64)) -> (usize, usize) {
        let inner = &self.bounds[1..self.bounds.len() - 1];
        let i = inner.iter().filter(|b| b.eval(y) <= x).count();
        let cuts = &self.cuts[i];
        let j = cuts[1..cuts.len() - 1].iter().filter(|c| c.eval(x) <= y).count();
        (i, j)
    }

    fn polygon(&self, i: usize, j: usize) -> Vec<(f64, f64)> {
        let (l, r) = (&self.bounds[i], &self.bounds[i + 1]);
        let (t, b) = (&self.cuts[i][j], &self.cuts[i][j + 1]);
        let tl = intersect(l, t);
        let tr = intersect(r, t);
        let br = intersect(r, b);
        let bl = intersect(l, b);
        let mut poly = vec![tl];
        poly.extend(t.interior(tl.0, tr.0));
        poly.push(tr);
        poly.extend(r.interior(tr.1, br.1).map(|(y, x)| (x, y)));
        poly.push(br);
        let mut bottom: Vec<_> = b.interior(bl.0, br.0).collect();
        bottom.reverse();
        poly.extend(bottom);
        poly.push(bl);
        let mut left: Vec<_> = l.interior(tl.1, bl.1).map(|(y, x)| (x, y)).collect();
        left.reverse();
        poly.extend(left);
        poly.dedup();
        if poly.len() > 1 && poly[0] == poly[poly.len() - 1] {
            poly.pop();
        }
        poly
    }
}

fn place(poly: &[(f64, f64)], rotation: f64, margin: usize) -> ((f64, f64), (f64, f64), usize, usize) {
    let centroid = polygon_centroid(poly);
    let (s, c) = rotation.to_radians().sin_cos();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in poly {
        let (dx, dy) = (x - centroid.0, y - centroid.1);
        let (rx, ry) = (dx * c + dy * s, -dx * s + dy * c);
        x0 = x0.min(rx);
        x1 = x1.max(rx);
        y0 = y0.min(ry);
        y1 = y1.max(ry);
    }
    let m = margin as f64;
    let scan_w = (x1 - x0).ceil() as usize + 2 * margin;
    let scan_h = (y1 - y0).ceil() as usize + 2 * margin;
    (centroid, (m - x0, m - y0), scan_w, scan_h)
}

#[allow(clippy::too_many_arguments)]
fn render(
    face: &RasterImage,
    ground_truth_id: &str,
    piece_id: String,
    polygon: Vec<(f64, f64)>,
    rotation: f64,
    margin: usize,
    inside: impl Fn((f64, f64)) -> bool,
) -> ShredPiece {
    let (centroid, scan_center, scan_w, scan_h) = place(&polygon, rotation, margin);
    let oracle = OracleRecord {
        piece_id,
        ground_truth_id: ground_truth_id.to_string(),
        polygon,
        center: (centroid.0 - 0.5, centroid.1 - 0.5),
        rotation,
        scan_center,
        scan_width: scan_w,
        scan_height: scan_h,
    };
    let (fw, fh) = (face.width() as f64, face.height() as f64);
    let scan = RasterImage::from_fn(scan_w, scan_h, |x, y| {
        let p = oracle.to_face((x as f64 + 0.5, y as f64 + 0.5));
        if p.0 < 0.0 || p.1 < 0.0 || p.0 >= fw || p.1 >= fh || !inside(p) {
            return WHITE;
        }
        let sx = (p.0 - 0.5).clamp(0.0, fw - 1.0);
        let sy = (p.1 - 0.5).clamp(0.0, fh - 1.0);
        sample_bilinear(face, sx, sy, WHITE)
    })
    .expect("scan has a positive margin");
    ShredPiece { scan, oracle }
}

fn piece_id(n: usize) -> String {
    format!("piece_{n:02}")
}

/// Cuts `face` into pieces according to `spec`. Deterministic per seed;
/// the oracle polygons tile the face exactly.
pub fn shred(face: &RasterImage, ground_truth_id: &str, spec: &ShredSpec) -> Result<Vec<ShredPiece>> {
    spec.validate(face.width(), face.height())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = Layout::new(face.width(), face.height(), spec, &mut rng);
    let jobs: Vec<_> = layout
        .pieces()
        .enumerate()
        .map(|(n, (i, j))| (n, i, j, rng.gen_range(0.0..360.0)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(n, i, j, rot)| {
            render(face, ground_truth_id, piece_id(n), layout.polygon(i, j), rot, spec.margin, |p| {
                layout.locate(p) == (i, j)
            })
        })
        .collect())
}

/// Cuts two faces of one note congruently: the back of each piece is the
/// front's outline mirrored across the note's vertical axis (`x -> W - x`),
/// as when a physical note is flipped over. Front and back are scanned at
/// independent angles.
pub fn shred_two_sided(
    front: &RasterImage,
    front_id: &str,
    back: &RasterImage,
    back_id: &str,
    spec: &ShredSpec,
) -> Result<Vec<TwoSidedPiece>> {
    if front.dimensions() != back.dimensions() {
        return Err(Error::Mismatch(format!(
            "front is {:?} but back is {:?}",
            front.dimensions(),
            back.dimensions()
        )));
    }
    spec.validate(front.width(), front.height())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layout = Layout::new(front.width(), front.height(), spec, &mut rng);
    let jobs: Vec<_> = layout
        .pieces()
        .enumerate()
        .map(|(n, (i, j))| (n, i, j, rng.gen_range(0.0..360.0), rng.gen_range(0.0..360.0)))
        .collect();
    let w = layout.width;
    Ok(jobs
        .into_par_iter()
        .map(|(n, i, j, rot_front, rot_back)| {
            let poly = layout.polygon(i, j);
            let mut mirrored: Vec<_> = poly.iter().map(|&(x, y)| (w - x, y)).collect();
            mirrored.reverse();
            let front = render(front, front_id, format!("{}_front", piece_id(n)), poly, rot_front, spec.margin, |p| {
                layout.locate(p) == (i, j)
            });
            let back = render(back, back_id, format!("{}_back", piece_id(n)), mirrored, rot_back, spec.margin, |p| {
                layout.locate((w - p.0, p.1)) == (i, j)
            });
            TwoSidedPiece { front, back }
        })
        .collect())
}

/// How one piece fared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceRecovery {
    pub piece_id: String,
    pub expected_ground_truth_id: String,
    /// `None` when the piece has no result (for example, routed out).
    pub found_ground_truth_id: Option<String>,
    /// Distance from the true centre, when a result exists.
    pub distance: Option<f64>,
    pub recovered: bool,
}

/// Outcome of comparing results with the oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub recovered: usize,
    pub total: usize,
    pub fraction: f64,
    pub pos_tol: f64,
    pub pieces: Vec<PieceRecovery>,
}

/// Scores results against the oracle. A piece is recovered when its best
/// result names the right face and its unrotated centre lies within
/// `pos_tol` pixels of the true centre. Pieces without a result count as
/// missed; results for pieces the oracle does not know are an error.
pub fn score_recovery(results: &[MatchResult], oracles: &[OracleRecord], pos_tol: f64) -> Result<RecoveryReport> {
    let mut best: std::collections::HashMap<&str, &MatchResult> = std::collections::HashMap::new();
    for r in results {
        if !oracles.iter().any(|o| o.piece_id == r.piece_id) {
            return Err(Error::UnknownId(r.piece_id.clone()));
        }
        best.entry(r.piece_id.as_str())
            .and_modify(|b| {
                if r.match_value > b.match_value {
                    *b = r;
                }
            })
            .or_insert(r);
    }
    let pieces: Vec<PieceRecovery> = oracles
        .iter()
        .map(|o| {
            let found = best.get(o.piece_id.as_str());
            let distance = found.map(|r| (r.unrotated_center_x - o.center.0).hypot(r.unrotated_center_y - o.center.1));
            let recovered = found.is_some_and(|r| r.ground_truth_id == o.ground_truth_id)
                && distance.is_some_and(|d| d <= pos_tol);
            PieceRecovery {
                piece_id: o.piece_id.clone(),
                expected_ground_truth_id: o.ground_truth_id.clone(),
                found_ground_truth_id: found.map(|r| r.ground_truth_id.clone()),
                distance,
                recovered,
            }
        })
        .collect();
    let recovered = pieces.iter().filter(|p| p.recovered).count();
    let total = pieces.len();
    Ok(RecoveryReport {
        recovered,
        total,
        fraction: if total == 0 { 0.0 } else { recovered as f64 / total as f64 },
        pos_tol,
        pieces,
    })
}
