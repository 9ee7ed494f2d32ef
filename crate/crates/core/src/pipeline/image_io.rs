//! 8-bit grayscale image files (binary PGM and PNG).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder};

use crate::error::{Error, Result};
use crate::grid::{GridShape, SpatialField};

fn image_error(path: &Path, e: impl ToString) -> Error {
    Error::Image { path: path.to_path_buf(), message: e.to_string() }
}

/// Loads an image as a `[rows, cols]` field on the `[0, 255]` scale.
pub fn load_image(path: &Path) -> Result<SpatialField> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_luma8();
    let (w, h) = img.dimensions();
    let shape = GridShape::new(vec![h as usize, w as usize])?;
    SpatialField::new(shape, img.into_raw().into_iter().map(f64::from).collect())
}

/// Rounds and clamps to 8 bits.
pub fn to_gray8(field: &SpatialField) -> Result<GrayImage> {
    let dims = field.shape().dims();
    if dims.len() != 2 {
        return Err(Error::InvalidArgument(format!("images are 2-D, got {dims:?}")));
    }
    let pixels = field.values().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::from_raw(dims[1] as u32, dims[0] as u32, pixels)
        .ok_or_else(|| Error::InvalidArgument("pixel buffer does not match dimensions".into()))
}

/// Writes an 8-bit image: binary PGM for `.pgm`/`.pnm`, otherwise the format
/// follows the extension.
pub fn save_image(path: &Path, field: &SpatialField) -> Result<()> {
    let img = to_gray8(field)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "pgm" || ext == "pnm" {
        let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut w = BufWriter::new(file);
        PnmEncoder::new(&mut w)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
            .map_err(|e| image_error(path, e))?;
        return w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source });
    }
    img.save(path).map_err(|e| image_error(path, e))
}

/// Centered `size x size` crop, or the field itself when it is not larger.
pub fn center_crop(field: &SpatialField, size: usize) -> Result<SpatialField> {
    let dims = field.shape().dims().to_vec();
    if dims.iter().all(|&d| d <= size) {
        return Ok(field.clone());
    }
    let new: Vec<usize> = dims.iter().map(|&d| d.min(size)).collect();
    let start: Vec<usize> = dims.iter().zip(&new).map(|(d, n)| (d - n) / 2).collect();
    let shape = GridShape::new(new)?;
    let src = field.shape().clone();
    Ok(SpatialField::from_fn(&shape, |c| {
        let at: Vec<usize> = c.iter().zip(&start).map(|(a, b)| a + b).collect();
        field.values()[src.flat(&at)]
    }))
}
