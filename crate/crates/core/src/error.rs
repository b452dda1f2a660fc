use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the shredmap library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("region out of bounds: {coordinate} = {value} exceeds limit {limit}")]
    OutOfBounds {
        coordinate: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    #[error("empty mask")]
    EmptyMask,
    #[error("empty ground truth set")]
    EmptyGroundTruth,
    #[error("duplicate ground truth id {id:?} (from {path})")]
    DuplicateId { id: String, path: PathBuf },
    #[error("unknown ground truth id {0:?}")]
    UnknownId(String),
    #[error("rotation {degrees} is not a multiple of step {step}")]
    MisalignedRotation { degrees: u32, step: u32 },
    #[error("rotation step {0} must be in 1..=360 and divide 360")]
    InvalidStep(u32),
    #[error("template exceeds view: template {template_w}x{template_h}, view {view_w}x{view_h}")]
    TemplateExceedsView {
        template_w: usize,
        template_h: usize,
        view_w: usize,
        view_h: usize,
    },
    #[error("template too small: {pixels} px, minimum {min}")]
    TemplateTooSmall { pixels: usize, min: usize },
    #[error("unpaired faces: {front:?} and {back:?} are not front/back of one design")]
    UnpairedFaces { front: String, back: String },
    #[error("mismatched lists: {0}")]
    Mismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid weight {input:?}: {reason}")]
    InvalidWeight { input: String, reason: String },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
