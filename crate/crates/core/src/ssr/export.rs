use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};

use super::{BinaryMask, SceneRep, SsrError};

/// Grayscale rendering: foreground 255, background 0.
pub fn mask_to_png(mask: &BinaryMask) -> GrayImage {
    let mut img = GrayImage::new(mask.width(), mask.height());
    for (x, y) in mask.pixels() {
        img.put_pixel(x, y, Luma([255]));
    }
    img
}

/// Thresholds a grayscale image at 128.
pub fn mask_from_png(img: &GrayImage) -> Result<BinaryMask, SsrError> {
    BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[0] >= 128)
}

/// Writes `object_<id>.png` for every object and returns the paths in id
/// order.
pub fn export_mask_pngs(scene: &SceneRep, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    scene
        .objects()
        .iter()
        .map(|o| {
            let path = dir.join(format!("object_{}.png", o.id));
            mask_to_png(&o.mask)
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(std::io::Error::other)?;
            Ok(path)
        })
        .collect()
}
