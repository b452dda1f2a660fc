//! Locate shredded banknote fragments on reference banknote scans.
//!
//! The pipeline segments fragments from scans ([`segmentation`]), cuts the
//! largest background-free rectangle from each over a sweep of rotations
//! ([`rectfit`]), and scores it by zero-normalized cross-correlation against
//! every rotation of every reference face ([`groundtruth`], [`matcher`]).
//! [`shredsim`] is a seeded synthetic shredder that records true poses,
//! [`serialdetect`] routes serial-number pieces out of automatic matching,
//! and [`audit`] does the paperweight weight arithmetic.
//!
//! Image math is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pin the `f64` instantiations the pipeline uses.

pub mod audit;
pub mod error;
pub mod fft;
pub mod groundtruth;
pub mod imagecore;
pub mod io;
pub mod matcher;
pub mod pipeline;
pub mod rectfit;
pub mod scalar;
pub mod segmentation;
pub mod serialdetect;
pub mod shredsim;
pub mod surface;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision luminance image.
pub type GrayImageF64 = imagecore::GrayImage<f64>;
/// Single-precision luminance image.
pub type GrayImageF32 = imagecore::GrayImage<f32>;
/// Double-precision summed-area tables.
pub type IntegralImageF64 = imagecore::IntegralImage<f64>;
pub type IntegralImageF32 = imagecore::IntegralImage<f32>;
