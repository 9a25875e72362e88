//! PNG and base64 helpers for RGB rasters.

use std::io::Cursor;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use image::{ImageFormat, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("cannot read image {path}: {message}")]
    Read { path: String, message: String },
    #[error("cannot write image {path}: {message}")]
    Write { path: String, message: String },
    #[error("invalid PNG payload: {0}")]
    Decode(String),
    #[error("invalid base64 payload: {0}")]
    Base64(String),
}

pub fn load_rgb(path: &Path) -> Result<RgbImage, RasterError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| RasterError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

pub fn save_png(image: &RgbImage, path: &Path) -> Result<(), RasterError> {
    let bytes = encode_png(image);
    std::fs::write(path, bytes).map_err(|e| RasterError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn encode_png(image: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .expect("in-memory PNG encoding does not fail");
    buf.into_inner()
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, RasterError> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_rgb8())
        .map_err(|e| RasterError::Decode(e.to_string()))
}

pub fn png_base64(image: &RgbImage) -> String {
    B64.encode(encode_png(image))
}

pub fn png_from_base64(text: &str) -> Result<RgbImage, RasterError> {
    let bytes = B64
        .decode(text)
        .map_err(|e| RasterError::Base64(e.to_string()))?;
    decode_png(&bytes)
}
