//! Batch orchestration: scans in, placements out.
//!
//! segment → classify → route → template → match, with a CSV of results
//! and one figure panel per matched piece.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundtruth::GroundTruthSet;
use crate::imagecore::{rotate, RasterImage, RED, WHITE};
use crate::matcher::{annotate, match_pieces, MatchConfig, MatchResult};
use crate::rectfit::{best_template, RectFitConfig, TemplateChoice, TemplateRecord};
use crate::scalar::Scalar;
use crate::segmentation::{segment_scan, Piece, SegmentConfig};
use crate::serialdetect::{route, GlyphRowClassifier, PieceClass, PieceClassifier, PieceLabel};

/// Settings for every stage. Missing JSON fields take their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub segment: SegmentConfig,
    pub rectfit: RectFitConfig,
    pub classifier: crate::serialdetect::GlyphParams,
    pub matching: MatchConfig,
}

/// What happened to a piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PieceStatus {
    Matched,
    /// Routed to manual placement by the classifier.
    Serial,
    /// No usable template (too small, or larger than every view).
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceReport {
    pub piece_id: String,
    pub scan_id: String,
    pub label: PieceLabel,
    pub template: Option<TemplateRecord>,
    #[serde(flatten)]
    pub status: PieceStatus,
    pub results: Vec<MatchResult>,
}

/// Everything a batch produced, in piece order.
#[derive(Clone, Debug)]
pub struct BatchRun {
    pub reports: Vec<PieceReport>,
    pub pieces: Vec<Piece>,
    pub templates: Vec<Option<TemplateChoice>>,
}

impl BatchRun {
    /// Every result row, piece by piece, best first.
    pub fn results(&self) -> impl Iterator<Item = &MatchResult> {
        self.reports.iter().flat_map(|r| &r.results)
    }
}

/// Runs `f` on a dedicated pool of `workers` threads (`None`: rayon's
/// default). Output never depends on the worker count.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

/// Processes scans with the default glyph-row classifier.
pub fn run_batch<T: Scalar>(set: &GroundTruthSet<T>, scans: &[(String, RasterImage)], cfg: &BatchConfig) -> Result<BatchRun> {
    run_batch_with(set, scans, cfg, &GlyphRowClassifier::new(cfg.classifier.clone()))
}

/// [`run_batch`] with a caller-supplied classifier.
pub fn run_batch_with<T: Scalar>(
    set: &GroundTruthSet<T>,
    scans: &[(String, RasterImage)],
    cfg: &BatchConfig,
    classifier: &dyn PieceClassifier,
) -> Result<BatchRun> {
    let mut order: Vec<usize> = (0..scans.len()).collect();
    order.sort_by(|&a, &b| scans[a].0.cmp(&scans[b].0));
    let segmented: Vec<Vec<(String, Piece)>> = order
        .par_iter()
        .map(|&i| {
            let (id, scan) = &scans[i];
            Ok(segment_scan(id, scan, &cfg.segment)?.into_iter().map(|p| (id.clone(), p)).collect())
        })
        .collect::<Result<_>>()?;
    let (scan_ids, pieces): (Vec<String>, Vec<Piece>) = segmented.into_iter().flatten().unzip();
    let labels: Vec<PieceLabel> = pieces.par_iter().map(|p| classifier.classify(p)).collect();

    let indexed: Vec<Indexed> = pieces.iter().enumerate().map(|(i, p)| Indexed(i, p)).collect();
    let (regular, _serial) = route(indexed, &labels)?;
    let regular: Vec<usize> = regular.iter().map(|r| r.0).collect();

    let mut templates: Vec<Option<TemplateChoice>> = vec![None; pieces.len()];
    let mut skipped: Vec<Option<String>> = vec![None; pieces.len()];
    let choices: Vec<(usize, Result<TemplateChoice>)> =
        regular.par_iter().map(|&i| (i, best_template(&pieces[i], &cfg.rectfit))).collect();
    let mut matchable = Vec::new();
    for (i, choice) in choices {
        match choice {
            Ok(c) => {
                let px = c.template.width() * c.template.height();
                let (tw, th) = c.template.dimensions();
                let fits = (0..set.entries().len()).any(|e| {
                    (0..360).step_by(cfg.matching.rotation_step.max(1) as usize).any(|d| {
                        let (w, h) = set.canvas_dims(e, d);
                        tw <= w && th <= h
                    })
                });
                if px < cfg.matching.min_template_pixels {
                    skipped[i] = Some(format!("template too small: {px} pixels, need {}", cfg.matching.min_template_pixels));
                } else if !fits {
                    skipped[i] = Some("template exceeds every view".into());
                } else {
                    matchable.push(i);
                }
                templates[i] = Some(c);
            }
            Err(e) => skipped[i] = Some(e.to_string()),
        }
    }
    let batch: Vec<TemplateChoice> = matchable.iter().map(|&i| templates[i].clone().expect("template kept")).collect();
    let mut results: Vec<Vec<MatchResult>> = vec![Vec::new(); pieces.len()];
    for (&i, r) in matchable.iter().zip(match_pieces(set, &batch, &cfg.matching)?) {
        results[i] = r;
    }

    let reports = pieces
        .iter()
        .enumerate()
        .map(|(i, p)| PieceReport {
            piece_id: p.id.clone(),
            scan_id: scan_ids[i].clone(),
            label: labels[i].clone(),
            template: templates[i].as_ref().map(TemplateRecord::from),
            status: if labels[i].label == PieceClass::S {
                PieceStatus::Serial
            } else if let Some(reason) = &skipped[i] {
                PieceStatus::Skipped { reason: reason.clone() }
            } else {
                PieceStatus::Matched
            },
            results: std::mem::take(&mut results[i]),
        })
        .collect();
    Ok(BatchRun {
        reports,
        pieces,
        templates,
    })
}

struct Indexed<'a>(usize, &'a Piece);

impl AsRef<Piece> for Indexed<'_> {
    fn as_ref(&self) -> &Piece {
        self.1
    }
}

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 8] = [
    "piece_id",
    "ground_truth_id",
    "rotation",
    "x",
    "y",
    "match_value",
    "unrotated_center_x",
    "unrotated_center_y",
];

pub fn write_results_csv<'a, W: Write>(out: W, results: impl IntoIterator<Item = &'a MatchResult>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<MatchResult>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Mismatch(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Largest panel height for the reference face; bigger faces are halved
/// until they fit.
const PANEL_FACE_HEIGHT: usize = 600;
const PANEL_GAP: usize = 12;

/// One figure panel, left to right: the rotated reference face with the
/// match boxed in red, the template, and the piece as segmented. Images
/// are not to a common scale.
pub fn render_panel<T: Scalar>(set: &GroundTruthSet<T>, piece: &Piece, template: &TemplateChoice, result: &MatchResult) -> Result<RasterImage> {
    let face = &set.entry(&result.ground_truth_id)?.image;
    let mut view = rotate(face, result.rotation as i32, WHITE);
    let (mut tw, mut th) = template.template.dimensions();
    let (mut x, mut y) = (result.x, result.y);
    while view.height() > PANEL_FACE_HEIGHT && tw >= 8 && th >= 8 {
        view = view.downsample2();
        (tw, th, x, y) = (tw / 2, th / 2, x / 2, y / 2);
    }
    let scaled = MatchResult { x, y, ..result.clone() };
    let boxed = annotate(&view, &scaled, (tw.min(view.width() - x), th.min(view.height() - y)), RED)?;

    let parts = [&boxed, &template.template, &piece.image];
    let width = parts.iter().map(|p| p.width()).sum::<usize>() + PANEL_GAP * (parts.len() + 1);
    let height = parts.iter().map(|p| p.height()).max().unwrap_or(1) + 2 * PANEL_GAP;
    let mut panel = RasterImage::filled(width, height, WHITE)?;
    let mut left = PANEL_GAP;
    for p in parts {
        panel.blit(p, left, PANEL_GAP);
        left += p.width() + PANEL_GAP;
    }
    Ok(panel)
}

/// Writes a panel for the best result of every matched piece to `dir`,
/// named after the piece.
pub fn write_panels<T: Scalar>(set: &GroundTruthSet<T>, run: &BatchRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    (0..run.reports.len())
        .into_par_iter()
        .filter_map(|i| {
            let best = run.reports[i].results.first()?;
            let template = run.templates[i].as_ref()?;
            Some((i, best, template))
        })
        .try_for_each(|(i, best, template)| {
            let panel = render_panel(set, &run.pieces[i], template, best)?;
            crate::io::save_raster(dir.join(format!("{}.png", run.reports[i].piece_id)), &panel)
        })
}
