use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groundtruth::{GroundTruthSet, RotatedView};
use crate::imagecore::{to_gray, GrayImage, RectRegion};
use crate::matcher::zncc::{prefer_fft, zncc_score_map_pair, zncc_score_map_with, PreparedTemplate, ScoreMap, ScoreMethod};
use crate::matcher::{MatchConfig, MatchResult};
use crate::rectfit::TemplateChoice;
use crate::scalar::Scalar;
use crate::surface::SearchSurface;

/// Coarse templates are kept at least this many pixels on each side.
const MIN_COARSE_SIDE: usize = 12;
/// Peaks kept per coarse view and template.
const COARSE_PEAKS: usize = 2;

#[derive(Clone, Copy, Debug)]
struct Hit {
    score: f64,
    entry: usize,
    degrees: u32,
    x: usize,
    y: usize,
}

struct Job<T: Scalar> {
    full: PreparedTemplate<T>,
    /// Coarse level and template. The coarse sweep only proposes
    /// candidates, so it runs in single precision whatever `T` is.
    coarse: Option<(usize, PreparedTemplate<f32>)>,
    anchor: (f64, f64),
}

fn order(a: &Hit, b: &Hit, ids: &[&str]) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| ids[a.entry].cmp(ids[b.entry]))
        .then(a.degrees.cmp(&b.degrees))
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
}

/// Keeps the best `k` positions of one map under the total order.
fn top_positions<T: Scalar>(map: &ScoreMap<T>, k: usize, entry: usize, degrees: u32, offset: (usize, usize)) -> Vec<Hit> {
    let mut best: Vec<Hit> = Vec::with_capacity(k + 1);
    for y in 0..map.height() {
        for x in 0..map.width() {
            let score = map.get(x, y).as_f64();
            if best.len() == k && score <= best[k - 1].score {
                continue;
            }
            let hit = Hit {
                score,
                entry,
                degrees,
                x: x + offset.0,
                y: y + offset.1,
            };
            // Positions arrive in (y, x) order, so equal scores already sit
            // in tie order: insert after them.
            let at = best.partition_point(|h| h.score >= score);
            best.insert(at, hit);
            best.truncate(k);
        }
    }
    best
}

fn coarse_level<T: Scalar>(template: &GrayImage<T>, levels: usize) -> Option<usize> {
    let min_side = template.width().min(template.height());
    (1..levels).rev().find(|&l| min_side >> l >= MIN_COARSE_SIDE)
}

/// Scores every job against one surface, pairing FFT-bound templates.
fn score_all<T: Scalar>(surface: &SearchSurface<T>, templates: &[&PreparedTemplate<T>]) -> Result<Vec<Option<ScoreMap<T>>>> {
    let mut out: Vec<Option<ScoreMap<T>>> = (0..templates.len()).map(|_| None).collect();
    let mut fft_queue = Vec::new();
    for (i, t) in templates.iter().enumerate() {
        if t.width() > surface.width() || t.height() > surface.height() {
            continue;
        }
        let positions = (surface.width() - t.width() + 1) * (surface.height() - t.height() + 1);
        if prefer_fft(positions, t.pixels(), surface.fft_dims()) {
            fft_queue.push(i);
        } else {
            out[i] = Some(zncc_score_map_with(surface, t, ScoreMethod::Direct)?);
        }
    }
    for pair in fft_queue.chunks(2) {
        match *pair {
            [a, b] => {
                let (ma, mb) = zncc_score_map_pair(surface, templates[a], templates[b])?;
                out[a] = Some(ma);
                out[b] = Some(mb);
            }
            [a] => out[a] = Some(zncc_score_map_with(surface, templates[a], ScoreMethod::Fft)?),
            _ => unreachable!(),
        }
    }
    Ok(out)
}

fn finish<T: Scalar>(
    set: &GroundTruthSet<T>,
    choices: &[TemplateChoice],
    jobs: &[Job<T>],
    mut hits: Vec<Vec<Hit>>,
    cfg: &MatchConfig,
) -> Result<Vec<Vec<MatchResult>>> {
    let ids = set.ids();
    let mut results = Vec::with_capacity(jobs.len());
    for (i, list) in hits.iter_mut().enumerate() {
        if list.is_empty() {
            let (tw, th) = choices[i].template.dimensions();
            let e = &set.entries()[0].image;
            return Err(Error::TemplateExceedsView {
                template_w: tw,
                template_h: th,
                view_w: e.width(),
                view_h: e.height(),
            });
        }
        list.sort_by(|a, b| order(a, b, &ids));
        list.dedup_by(|a, b| (a.entry, a.degrees, a.x, a.y) == (b.entry, b.degrees, b.x, b.y));
        list.truncate(cfg.top_k);
        let anchor = jobs[i].anchor;
        let entries = set.entries();
        let out = list
            .iter()
            .map(|h| {
                let img = &entries[h.entry].image;
                let geom = crate::imagecore::RotationGeometry::new(img.width(), img.height(), f64::from(h.degrees));
                let (cx, cy) = geom.to_source((h.x as f64 + anchor.0, h.y as f64 + anchor.1));
                MatchResult {
                    piece_id: choices[i].piece_id.clone(),
                    ground_truth_id: entries[h.entry].id.clone(),
                    rotation: h.degrees,
                    x: h.x,
                    y: h.y,
                    match_value: h.score,
                    unrotated_center_x: cx,
                    unrotated_center_y: cy,
                }
            })
            .collect();
        results.push(out);
    }
    Ok(results)
}

pub(super) fn run<T: Scalar>(set: &GroundTruthSet<T>, choices: &[TemplateChoice], cfg: &MatchConfig) -> Result<Vec<Vec<MatchResult>>> {
    let jobs: Vec<Job<T>> = choices
        .iter()
        .map(|c| {
            let gray: GrayImage<T> = to_gray(&c.template);
            let coarse = coarse_level(&gray, cfg.pyramid_levels).map(|level| {
                let mut g: GrayImage<f32> = to_gray(&c.template);
                for _ in 0..level {
                    g = g.downsample2();
                }
                (level, PreparedTemplate::new(&g))
            });
            Job {
                full: PreparedTemplate::new(&gray),
                coarse,
                anchor: c.anchor,
            }
        })
        .collect();
    let views: Vec<(usize, u32)> = (0..set.entries().len())
        .flat_map(|e| (0..360).step_by(cfg.rotation_step as usize).map(move |d| (e, d)))
        .collect();

    let (coarse_idx, full_idx): (Vec<usize>, Vec<usize>) = (0..jobs.len()).partition(|&i| jobs[i].coarse.is_some());
    let mut hits = vec![Vec::new(); jobs.len()];
    if !full_idx.is_empty() {
        let subset: Vec<&Job<T>> = full_idx.iter().map(|&i| &jobs[i]).collect();
        for (i, h) in full_idx.iter().zip(exhaustive(set, &subset, &views, cfg)?) {
            hits[*i] = h;
        }
    }
    if !coarse_idx.is_empty() {
        let subset: Vec<&Job<T>> = coarse_idx.iter().map(|&i| &jobs[i]).collect();
        for (i, h) in coarse_idx.iter().zip(pyramid(set, &subset, &views, cfg)?) {
            hits[*i] = h;
        }
    }
    finish(set, choices, &jobs, hits, cfg)
}

fn merge<H>(acc: &mut [Vec<H>], part: Vec<Vec<H>>) {
    for (a, p) in acc.iter_mut().zip(part) {
        a.extend(p);
    }
}

fn exhaustive<T: Scalar>(set: &GroundTruthSet<T>, jobs: &[&Job<T>], views: &[(usize, u32)], cfg: &MatchConfig) -> Result<Vec<Vec<Hit>>> {
    let templates: Vec<&PreparedTemplate<T>> = jobs.iter().map(|j| &j.full).collect();
    let per_view: Vec<Vec<Vec<Hit>>> = views
        .par_iter()
        .map(|&(entry, degrees)| {
            let view = set.fresh_view(entry, degrees, 0)?;
            let maps = score_all(&view.surface, &templates)?;
            Ok(maps
                .iter()
                .map(|m| m.as_ref().map_or_else(Vec::new, |m| top_positions(m, cfg.top_k, entry, degrees, (0, 0))))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![Vec::new(); jobs.len()];
    for part in per_view {
        merge(&mut acc, part);
    }
    Ok(acc)
}

/// A coarse-level peak expressed in the full-resolution unrotated frame.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    entry: usize,
    degrees: u32,
    scale: usize,
    /// Template centre, full-resolution unrotated coordinates.
    center: (f64, f64),
}

/// Up to `k` local maxima of a score map, each suppressing a square of
/// half-width `radius` around it.
fn peaks<T: Scalar>(map: &ScoreMap<T>, k: usize, radius: usize) -> Vec<(usize, usize, f64)> {
    let mut taken: Vec<(usize, usize, f64)> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<(usize, usize, f64)> = None;
        for y in 0..map.height() {
            for x in 0..map.width() {
                let s = map.get(x, y).as_f64();
                if best.is_some_and(|b| s <= b.2) {
                    continue;
                }
                if taken.iter().any(|&(tx, ty, _)| tx.abs_diff(x) <= radius && ty.abs_diff(y) <= radius) {
                    continue;
                }
                best = Some((x, y, s));
            }
        }
        match best {
            Some(b) => taken.push(b),
            None => break,
        }
    }
    taken
}

fn circular_gap(a: u32, b: u32) -> u32 {
    let d = a.abs_diff(b) % 360;
    d.min(360 - d)
}

fn pyramid<T: Scalar>(set: &GroundTruthSet<T>, jobs: &[&Job<T>], views: &[(usize, u32)], cfg: &MatchConfig) -> Result<Vec<Vec<Hit>>> {
    let mut levels: Vec<usize> = jobs.iter().filter_map(|j| j.coarse.as_ref().map(|c| c.0)).collect();
    levels.sort_unstable();
    levels.dedup();

    // Coarse rotations only need to land within the refinement band of
    // the true one, so the sweep can skip to every `refine_degrees`.
    let stride = cfg.rotation_step * (cfg.refine_degrees / cfg.rotation_step).max(1);
    let coarse_views: Vec<(usize, u32)> = views.iter().copied().filter(|&(_, d)| d % stride == 0).collect();
    let per_view: Vec<Vec<Vec<Candidate>>> = coarse_views
        .par_iter()
        .map(|&(entry, degrees)| {
            let mut out: Vec<Vec<Candidate>> = vec![Vec::new(); jobs.len()];
            for &level in &levels {
                let idx: Vec<usize> = (0..jobs.len())
                    .filter(|&i| jobs[i].coarse.as_ref().is_some_and(|c| c.0 == level))
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let view: RotatedView<f32> = set.fresh_view(entry, degrees, level)?;
                let templates: Vec<&PreparedTemplate<f32>> = idx.iter().map(|&i| &jobs[i].coarse.as_ref().unwrap().1).collect();
                let maps = score_all(&view.surface, &templates)?;
                for ((&i, t), map) in idx.iter().zip(&templates).zip(maps) {
                    let Some(map) = map else { continue };
                    let radius = (t.width().min(t.height()) / 2).max(1);
                    let half = ((t.width() as f64 - 1.0) / 2.0, (t.height() as f64 - 1.0) / 2.0);
                    for (x, y, score) in peaks(&map, COARSE_PEAKS, radius) {
                        out[i].push(Candidate {
                            score,
                            entry,
                            degrees,
                            scale: view.scale,
                            center: view.inverse((x as f64 + half.0, y as f64 + half.1)),
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut candidates = vec![Vec::new(); jobs.len()];
    for part in per_view {
        merge(&mut candidates, part);
    }

    let ids = set.ids();
    let mut tasks: Vec<(usize, usize, u32, (f64, f64), usize)> = Vec::new();
    for (i, list) in candidates.iter_mut().enumerate() {
        list.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| ids[a.entry].cmp(ids[b.entry]))
                .then(a.degrees.cmp(&b.degrees))
                .then(a.center.1.total_cmp(&b.center.1))
                .then(a.center.0.total_cmp(&b.center.0))
        });
        let mut beam: Vec<Candidate> = Vec::with_capacity(cfg.beam_width);
        for c in list.iter() {
            if beam.len() == cfg.beam_width {
                break;
            }
            let near = beam.iter().any(|b| {
                b.entry == c.entry
                    && circular_gap(b.degrees, c.degrees) <= cfg.refine_degrees
                    && (b.center.0 - c.center.0).hypot(b.center.1 - c.center.1) <= (cfg.refine_radius + c.scale) as f64
            });
            if !near {
                beam.push(*c);
            }
        }
        let steps = (cfg.refine_degrees / cfg.rotation_step) as i64;
        for c in &beam {
            let radius = cfg.refine_radius.max(c.scale);
            for k in -steps..=steps {
                let d = (i64::from(c.degrees) + k * i64::from(cfg.rotation_step)).rem_euclid(360) as u32;
                tasks.push((i, c.entry, d, c.center, radius));
            }
        }
    }

    let refined: Vec<(usize, Vec<Hit>)> = tasks
        .par_iter()
        .map(|&(i, entry, degrees, center, radius)| Ok((i, refine(set, &jobs[i].full, entry, degrees, center, radius, cfg.top_k)?)))
        .collect::<Result<_>>()?;
    let mut hits = vec![Vec::new(); jobs.len()];
    for (i, h) in refined {
        hits[i].extend(h);
    }
    Ok(hits)
}

/// Full-resolution search in a window around the predicted pose.
fn refine<T: Scalar>(
    set: &GroundTruthSet<T>,
    template: &PreparedTemplate<T>,
    entry: usize,
    degrees: u32,
    center: (f64, f64),
    radius: usize,
    top_k: usize,
) -> Result<Vec<Hit>> {
    let (tw, th) = (template.width(), template.height());
    let (cw, ch) = set.canvas_dims(entry, degrees);
    if tw > cw || th > ch {
        return Ok(Vec::new());
    }
    let img = &set.entries()[entry].image;
    let geom = crate::imagecore::RotationGeometry::new(img.width(), img.height(), f64::from(degrees));
    let (px, py) = geom.to_rotated(center);
    let left = (px - (tw as f64 - 1.0) / 2.0).round() as i64;
    let top = (py - (th as f64 - 1.0) / 2.0).round() as i64;
    let r = radius as i64;
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64) as usize;
    let (x0, x1) = (clamp(left - r, cw - tw), clamp(left + r, cw - tw));
    let (y0, y1) = (clamp(top - r, ch - th), clamp(top + r, ch - th));
    let region = RectRegion::new(x0, y0, x1 - x0 + tw, y1 - y0 + th);
    let surface = SearchSurface::new(set.render_window(entry, degrees, region)?);
    let map = zncc_score_map_with(&surface, template, ScoreMethod::Auto)?;
    Ok(top_positions(&map, top_k, entry, degrees, (x0, y0)))
}

