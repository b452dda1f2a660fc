//! PNG/JPEG decoding and encoding for [`RasterImage`] and [`BinaryMask`].

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb as PixelRgb};

use crate::error::{Error, Result};
use crate::imagecore::RasterImage;
use crate::segmentation::BinaryMask;

pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let decoded = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = decoded.dimensions();
    let pixels = decoded.pixels().map(|p| p.0).collect();
    RasterImage::from_pixels(w as usize, h as usize, pixels)
}

/// Encodes `img`; the format follows the file extension.
pub fn save_raster(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    let path = path.as_ref();
    let mut buf: ImageBuffer<PixelRgb<u8>, Vec<u8>> = ImageBuffer::new(img.width() as u32, img.height() as u32);
    for (dst, src) in buf.pixels_mut().zip(img.pixels()) {
        *dst = PixelRgb(*src);
    }
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a mask image: any pixel with luminance above mid-grey is `true`.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let decoded = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_luma8();
    let (w, h) = decoded.dimensions();
    let bits = decoded.pixels().map(|p| p.0[0] >= 128).collect();
    BinaryMask::from_bits(w as usize, h as usize, bits)
}

/// Saves a mask as 8-bit greyscale PNG (255 = fragment).
pub fn save_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let path = path.as_ref();
    let mut buf: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::new(mask.width() as u32, mask.height() as u32);
    for (dst, &bit) in buf.pixels_mut().zip(mask.bits()) {
        *dst = Luma([if bit { 255 } else { 0 }]);
    }
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
