//! Raster primitives: RGB storage, luminance, rotation, cropping, and
//! summed-area tables.
//!
//! Coordinates are integer pixel indices with the origin at the top-left,
//! x growing rightward and y downward. Rotation is counter-clockwise as seen
//! on screen.

mod gray;
mod integral;
mod raster;
mod rotate;

pub use gray::{to_gray, GrayImage};
pub use integral::IntegralImage;
pub use raster::{crop, RasterImage, RectRegion, Rgb, BLACK, RED, WHITE};
pub use rotate::{rotate, rotate_by, rotated_pixel, sample_bilinear, RotationGeometry};
