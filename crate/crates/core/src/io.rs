//! PNG reading and writing for images, masks and parsing maps.
//!
//! Only 8-bit grayscale and 8-bit RGB are accepted. Masks are stored as
//! grayscale 0/255 (any nonzero sample reads back as set); parsing maps store
//! the raw label code as the sample value.

use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageError, ImageFormat};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Image, ParsingMap};

fn decode(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|e| match e {
        ImageError::IoError(source) => Error::io(path, source),
        ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_owned(),
            detail: u.to_string(),
        },
        other => Error::Corrupt {
            path: path.to_owned(),
            detail: other.to_string(),
        },
    })
}

fn unsupported(path: &Path, img: &DynamicImage) -> Error {
    let color = img.color();
    let detail = if color.bytes_per_pixel() / color.channel_count() > 1 {
        format!("bit depth {} (only 8-bit)", color.bits_per_pixel() / u16::from(color.channel_count()))
    } else {
        format!("color type {color:?} (only gray or RGB)")
    };
    Error::UnsupportedFormat {
        path: path.to_owned(),
        detail,
    }
}

/// Loads an 8-bit gray or RGB PNG onto the unit interval.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Image::from_u8(w, h, 1, buf.as_raw()),
        DynamicImage::ImageRgb8(buf) => Image::from_u8(w, h, 3, buf.as_raw()),
        other => Err(unsupported(path, &other)),
    }
}

fn write_png(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> Result<()> {
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, ImageFormat::Png).map_err(
        |e| match e {
            ImageError::IoError(source) => Error::io(path, source),
            other => Error::Corrupt {
                path: path.to_owned(),
                detail: other.to_string(),
            },
        },
    )
}

/// Saves an image as an 8-bit PNG, quantizing with round-half-away-from-zero.
pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let color = if image.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    write_png(
        path.as_ref(),
        &image.to_u8(),
        image.width(),
        image.height(),
        color,
    )
}

fn load_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => Ok((w, h, buf.into_raw())),
        other => Err(unsupported(path, &other)),
    }
}

/// Loads a grayscale parsing map whose samples are label codes.
pub fn load_parsing_map(path: impl AsRef<Path>) -> Result<ParsingMap> {
    let (w, h, codes) = load_gray(path.as_ref())?;
    ParsingMap::from_codes(w, h, &codes)
}

pub fn save_parsing_map(map: &ParsingMap, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        &map.codes(),
        map.width(),
        map.height(),
        ExtendedColorType::L8,
    )
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (w, h, bytes) = load_gray(path.as_ref())?;
    BinaryMask::new(w, h, bytes.iter().map(|&b| b != 0).collect())
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_png(
        path.as_ref(),
        &bytes,
        mask.width(),
        mask.height(),
        ExtendedColorType::L8,
    )
}
