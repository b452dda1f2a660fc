use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use shredmap::groundtruth::{id_from_path, list_images, GroundTruthSet};
use shredmap::imagecore::{RasterImage, RectRegion, RED};
use shredmap::io::{load_mask, load_raster, save_mask, save_raster};
use shredmap::matcher::{annotate, match_piece, MatchConfig};
use shredmap::pipeline::{read_results_csv, run_batch, with_workers, write_panels, write_results_csv, BatchConfig};
use shredmap::rectfit::{best_template, RectFitConfig, TemplateChoice, TemplateRecord};
use shredmap::segmentation::{segment_scan, Piece, SegmentConfig};
use shredmap::serialdetect::{classify, GlyphParams};
use shredmap::shredsim::{score_recovery, shred, shred_two_sided, OracleRecord, ShredSpec};

#[derive(Parser)]
#[command(name = "shredmap", version, about = "Locate shredded banknote fragments on reference scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic banknote face.
    Synth(SynthArgs),
    /// Cut a face into pieces and write one scan per piece plus the truth.
    Shred(ShredArgs),
    /// Split scans into fragments.
    Segment(SegmentArgs),
    /// Label fragments as regular or serial-number bearing.
    Classify(ClassifyArgs),
    /// Extract the largest background-free rectangle from a fragment.
    Template(TemplateArgs),
    /// Render (and optionally cache) every rotated reference view.
    Prepare(PrepareArgs),
    /// Find one template on the reference faces.
    Match(MatchArgs),
    /// Run segmentation, classification, templating and matching over a directory of scans.
    Batch(BatchArgs),
    /// Compare batch results with a shredder oracle.
    Score(ScoreArgs),
    /// Weight arithmetic for an opened souvenir.
    Audit(AuditArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1600)]
    width: usize,
    #[arg(long, default_value_t = 800)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShredArgs {
    /// Face to cut (its file stem becomes the ground-truth id).
    #[arg(long)]
    input: PathBuf,
    /// Back face; when given, both faces are cut congruently.
    #[arg(long)]
    back: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Strip width range in pixels, `MIN,MAX` or a single value.
    #[arg(long, value_parser = parse_range, default_value = "200,257")]
    strip_width: (f64, f64),
    /// Piece length range in pixels, `MIN,MAX` or a single value.
    #[arg(long, value_parser = parse_range, default_value = "180,220")]
    piece_length: (f64, f64),
    #[arg(long, default_value_t = 4.0)]
    jitter: f64,
    #[arg(long, default_value_t = 16)]
    margin: usize,
    #[arg(long)]
    pieces_dir: PathBuf,
    /// Oracle JSON output.
    #[arg(long)]
    oracle: PathBuf,
}

#[derive(Args)]
struct SegmentFlags {
    #[arg(long, default_value_t = shredmap::segmentation::DEFAULT_WHITE_CUTOFF)]
    white_cutoff: u8,
    #[arg(long, default_value_t = shredmap::segmentation::DEFAULT_MIN_AREA)]
    min_area: usize,
    #[arg(long, default_value_t = shredmap::segmentation::DEFAULT_CLEAN_RADIUS)]
    clean_radius: usize,
}

impl SegmentFlags {
    fn config(&self) -> SegmentConfig {
        SegmentConfig {
            white_cutoff: self.white_cutoff,
            min_area: self.min_area,
            clean_radius: self.clean_radius,
        }
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(required = true)]
    scans: Vec<PathBuf>,
    #[command(flatten)]
    flags: SegmentFlags,
    /// Directory for `<id>.png`, `<id>_mask.png` and `index.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Fragment images; `<id>_mask.png` next to `<id>.png` is used when present,
    /// otherwise the image is segmented like a scan.
    #[arg(long)]
    pieces_dir: PathBuf,
    #[command(flatten)]
    flags: SegmentFlags,
    /// Classifier parameters as JSON.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    /// Fragment image.
    #[arg(long)]
    piece: PathBuf,
    /// Fragment mask; derived from the image's background when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    step: u32,
    #[arg(long, default_value_t = shredmap::segmentation::DEFAULT_WHITE_CUTOFF)]
    white_cutoff: u8,
    /// Template PNG output; the JSON record goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    ground_truth_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    step: u32,
    #[arg(long)]
    cache_dir: PathBuf,
    /// Pyramid levels to render as well.
    #[arg(long, default_value_t = 1)]
    pyramid: usize,
}

#[derive(Args)]
struct MatchArgs {
    /// Template PNG.
    #[arg(long)]
    template: PathBuf,
    /// Template record written by `template`; supplies the piece id and anchor.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    ground_truth_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    step: u32,
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    #[arg(long, default_value_t = 1)]
    pyramid: usize,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Draw the best result's box onto its rotated view.
    #[arg(long)]
    annotate: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    scans_dir: PathBuf,
    #[arg(long)]
    ground_truth_dir: PathBuf,
    /// Full pipeline settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    step: Option<u32>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    pyramid: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Result CSV.
    #[arg(long)]
    out: PathBuf,
    /// Per-piece report JSON (labels, templates, skips).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Directory for annotated panels.
    #[arg(long)]
    panels: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    /// Largest centre distance, in pixels, that still counts as recovered.
    #[arg(long, default_value_t = 3.0)]
    tolerance: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    match s.split_once(',') {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let v = parse(s)?;
            Ok((v, v))
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON to `path`, or to stdout without one.
fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    match path {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            serde_json::to_writer_pretty(&mut out, value)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn stem(path: &Path) -> Result<String> {
    id_from_path(path).with_context(|| format!("no usable file name in {}", path.display()))
}

fn load_set(dir: &Path, step: u32, cache_dir: Option<&Path>) -> Result<GroundTruthSet> {
    let set = GroundTruthSet::load_dir(dir, step).with_context(|| format!("loading ground truth from {}", dir.display()))?;
    Ok(match cache_dir {
        Some(c) => set.with_cache_dir(c)?,
        None => set,
    })
}

fn synth(args: SynthArgs) -> Result<()> {
    let face = shredmap::synth::synthetic_note(args.width, args.height, args.seed)?;
    save_raster(&args.out, &face)?;
    Ok(())
}

fn shred_cmd(args: ShredArgs) -> Result<()> {
    let spec = ShredSpec {
        strip_width_range: args.strip_width,
        cut_jitter: args.jitter,
        piece_length_range: args.piece_length,
        seed: args.seed,
        margin: args.margin,
    };
    let front_id = stem(&args.input)?;
    let front = load_raster(&args.input)?;
    let pieces: Vec<(RasterImage, OracleRecord)> = match &args.back {
        None => shred(&front, &front_id, &spec)?.into_iter().map(|p| (p.scan, p.oracle)).collect(),
        Some(back_path) => {
            let back = load_raster(back_path)?;
            shred_two_sided(&front, &front_id, &back, &stem(back_path)?, &spec)?
                .into_iter()
                .flat_map(|p| [(p.front.scan, p.front.oracle), (p.back.scan, p.back.oracle)])
                .collect()
        }
    };
    create_dir(&args.pieces_dir)?;
    pieces
        .par_iter()
        .try_for_each(|(scan, oracle)| save_raster(args.pieces_dir.join(format!("{}.png", oracle.piece_id)), scan))?;
    let oracles: Vec<&OracleRecord> = pieces.iter().map(|(_, o)| o).collect();
    write_json(Some(&args.oracle), &oracles)?;
    eprintln!("wrote {} pieces to {}", pieces.len(), args.pieces_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SegmentIndexEntry {
    segment_id: String,
    scan: String,
    origin: (usize, usize),
    area: usize,
    bounding_box: RectRegion,
}

fn segment_cmd(args: SegmentArgs) -> Result<()> {
    let cfg = args.flags.config();
    create_dir(&args.out_dir)?;
    let mut index = Vec::new();
    for path in &args.scans {
        let scan_id = stem(path)?;
        let scan = load_raster(path)?;
        for piece in segment_scan(&scan_id, &scan, &cfg)? {
            save_raster(args.out_dir.join(format!("{}.png", piece.id)), &piece.image)?;
            save_mask(args.out_dir.join(format!("{}_mask.png", piece.id)), &piece.segment.mask)?;
            index.push(SegmentIndexEntry {
                bounding_box: piece.segment.bounding_box(),
                segment_id: piece.id,
                scan: scan_id.clone(),
                origin: piece.segment.origin,
                area: piece.segment.area,
            });
        }
    }
    write_json(Some(&args.out_dir.join("index.json")), &index)?;
    eprintln!("wrote {} segments to {}", index.len(), args.out_dir.display());
    Ok(())
}

/// Pieces in `dir`: images with a sibling `_mask.png` are taken as-is,
/// anything else is segmented.
fn load_pieces(dir: &Path, cfg: &SegmentConfig) -> Result<Vec<Piece>> {
    let mut pieces = Vec::new();
    for path in list_images(dir)? {
        let id = stem(&path)?;
        if id.ends_with("_mask") {
            continue;
        }
        let image = load_raster(&path)?;
        let mask_path = dir.join(format!("{id}_mask.png"));
        if mask_path.is_file() {
            pieces.push(Piece::from_parts(id, image, load_mask(&mask_path)?)?);
        } else {
            pieces.extend(segment_scan(&id, &image, cfg)?);
        }
    }
    Ok(pieces)
}

fn classify_cmd(args: ClassifyArgs) -> Result<()> {
    let params: GlyphParams = match &args.params {
        Some(p) => read_json(p)?,
        None => GlyphParams::default(),
    };
    let pieces = load_pieces(&args.pieces_dir, &args.flags.config())?;
    let labels: Vec<_> = pieces.par_iter().map(|p| classify(p, &params)).collect();
    write_json(args.out.as_deref(), &labels)
}

fn template_cmd(args: TemplateArgs) -> Result<()> {
    let id = stem(&args.piece)?;
    let image = load_raster(&args.piece)?;
    let piece = match &args.mask {
        Some(m) => Piece::from_parts(id, image, load_mask(m)?)?,
        None => {
            let cfg = SegmentConfig {
                white_cutoff: args.white_cutoff,
                ..SegmentConfig::default()
            };
            let mut pieces = segment_scan(&id, &image, &cfg)?;
            ensure!(!pieces.is_empty(), "no fragment found in {}", args.piece.display());
            pieces.swap_remove(0)
        }
    };
    let cfg = RectFitConfig {
        step: args.step,
        white_cutoff: args.white_cutoff,
    };
    let choice = best_template(&piece, &cfg)?;
    save_raster(&args.out, &choice.template)?;
    write_json(Some(&args.out.with_extension("json")), &TemplateRecord::from(&choice))
}

fn prepare_cmd(args: PrepareArgs) -> Result<()> {
    let set = load_set(&args.ground_truth_dir, args.step, Some(&args.cache_dir))?;
    set.warm(args.pyramid)?;
    let manifest = set.manifest();
    write_json(Some(&args.cache_dir.join("manifest.json")), &manifest)?;
    eprintln!(
        "prepared {} search images from {} faces",
        manifest.search_images,
        manifest.entries.len()
    );
    Ok(())
}

fn match_cmd(args: MatchArgs) -> Result<()> {
    let template = load_raster(&args.template)?;
    let choice = match &args.record {
        Some(path) => {
            let record: TemplateRecord = read_json(path)?;
            ensure!(
                template.dimensions() == (record.rect.w, record.rect.h),
                "template is {:?} but its record says {}x{}",
                template.dimensions(),
                record.rect.w,
                record.rect.h
            );
            TemplateChoice {
                piece_id: record.piece_id,
                piece_rotation: record.piece_rotation,
                rect: record.rect,
                area: record.area,
                template,
                anchor: record.anchor,
            }
        }
        None => TemplateChoice::from_template(stem(&args.template)?, template),
    };
    let set = load_set(&args.ground_truth_dir, args.step, args.cache_dir.as_deref())?;
    let cfg = MatchConfig {
        rotation_step: args.step,
        top_k: args.top_k,
        pyramid_levels: args.pyramid,
        ..MatchConfig::default()
    };
    let results = match_piece(&set, &choice, &cfg)?;
    if let (Some(path), Some(best)) = (&args.annotate, results.first()) {
        let view = set.rotated_view(&best.ground_truth_id, best.rotation)?;
        let dims = choice.template.dimensions();
        save_raster(path, &annotate(&view.image, best, dims, RED)?)?;
    }
    write_json(args.out.as_deref(), &results)
}

fn batch_cmd(args: BatchArgs) -> Result<()> {
    let mut cfg: BatchConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => BatchConfig::default(),
    };
    if let Some(step) = args.step {
        cfg.rectfit.step = step;
        cfg.matching.rotation_step = step;
    }
    if let Some(k) = args.top_k {
        cfg.matching.top_k = k;
    }
    if let Some(p) = args.pyramid {
        cfg.matching.pyramid_levels = p;
    }
    let set = load_set(&args.ground_truth_dir, cfg.matching.rotation_step, args.cache_dir.as_deref())?;
    let paths = list_images(&args.scans_dir)?;
    ensure!(!paths.is_empty(), "no scans in {}", args.scans_dir.display());
    let scans = paths
        .iter()
        .map(|p| Ok((stem(p)?, load_raster(p)?)))
        .collect::<Result<Vec<_>>>()?;

    let run = with_workers(args.workers, || -> Result<_> {
        let run = run_batch(&set, &scans, &cfg)?;
        if let Some(dir) = &args.panels {
            write_panels(&set, &run, dir)?;
        }
        Ok(run)
    })??;

    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_results_csv(BufWriter::new(file), run.results())?;
    if let Some(path) = &args.report {
        write_json(Some(path), &run.reports)?;
    }
    let matched = run.reports.iter().filter(|r| !r.results.is_empty()).count();
    eprintln!("{} pieces, {matched} matched", run.reports.len());
    Ok(())
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let file = File::open(&args.results).with_context(|| format!("opening {}", args.results.display()))?;
    let results = read_results_csv(BufReader::new(file))?;
    let oracles: Vec<OracleRecord> = read_json(&args.oracle)?;
    if oracles.is_empty() {
        bail!("oracle {} lists no pieces", args.oracle.display());
    }
    let report = score_recovery(&results, &oracles, args.tolerance)?;
    eprintln!(
        "recovered {}/{} = {:.3} within {} px",
        report.recovered, report.total, report.fraction, report.pos_tol
    );
    write_json(args.out.as_deref(), &report)
}

fn audit_cmd(args: AuditArgs) -> Result<()> {
    let ledger: shredmap::audit::AuditLedger = read_json(&args.ledger)?;
    let report = shredmap::audit::audit(&ledger)?;
    match &args.out {
        Some(path) => {
            write_json(Some(path), &report)?;
            print!("{}", shredmap::audit::render_table(&ledger, &report));
        }
        None => {
            write_json(None, &report)?;
            eprint!("{}", shredmap::audit::render_table(&ledger, &report));
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Shred(a) => shred_cmd(a),
        Command::Segment(a) => segment_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Template(a) => template_cmd(a),
        Command::Prepare(a) => prepare_cmd(a),
        Command::Match(a) => match_cmd(a),
        Command::Batch(a) => batch_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Audit(a) => audit_cmd(a),
    }
}
