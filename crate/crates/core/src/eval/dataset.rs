//! Benchmark dataset layout:
//!
//! ```text
//! <root>/manifest.json          {"samples": ["id", ...]}
//! <root>/<id>/image.png
//! <root>/<id>/query.txt
//! <root>/<id>/mask.png          ground-truth edit region, >= 128 is inside
//! <root>/<id>/reference.png     optional target image
//! ```

use std::path::Path;

use image::RgbImage;
use serde::Deserialize;

use super::EvalError;
use crate::raster;
use crate::ssr::{mask_from_png, BinaryMask};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq)]
pub struct EditSample {
    pub id: String,
    pub image: RgbImage,
    pub query: String,
    pub gt_mask: BinaryMask,
    pub reference: Option<RgbImage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    samples: Vec<String>,
}

fn bad(sample: &str, detail: impl Into<String>) -> EvalError {
    EvalError::Dataset {
        sample: sample.to_string(),
        detail: detail.into(),
    }
}

fn load_sample(root: &Path, id: &str) -> Result<EditSample, EvalError> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(bad(id, "invalid sample id"));
    }
    let dir = root.join(id);
    let image = raster::load_rgb(&dir.join("image.png")).map_err(|e| bad(id, e.to_string()))?;
    let query = std::fs::read_to_string(dir.join("query.txt"))
        .map_err(|e| bad(id, format!("query.txt: {e}")))?
        .trim()
        .to_string();
    if query.is_empty() {
        return Err(bad(id, "query.txt is empty"));
    }
    let mask_img = image::open(dir.join("mask.png"))
        .map_err(|e| bad(id, format!("mask.png: {e}")))?
        .to_luma8();
    if mask_img.dimensions() != image.dimensions() {
        return Err(bad(
            id,
            format!("mask is {:?}, image is {:?}", mask_img.dimensions(), image.dimensions()),
        ));
    }
    let gt_mask = mask_from_png(&mask_img).map_err(|e| bad(id, e.to_string()))?;
    let ref_path = dir.join("reference.png");
    let reference = if ref_path.exists() {
        let r = raster::load_rgb(&ref_path).map_err(|e| bad(id, e.to_string()))?;
        if r.dimensions() != image.dimensions() {
            return Err(bad(id, "reference size differs from image"));
        }
        Some(r)
    } else {
        None
    };
    Ok(EditSample {
        id: id.to_string(),
        image,
        query,
        gt_mask,
        reference,
    })
}

/// Loads every sample listed in the manifest, in manifest order.
pub fn load_dataset(root: &Path) -> Result<Vec<EditSample>, EvalError> {
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| bad(MANIFEST_FILE, e.to_string()))?;
    let mut seen = std::collections::BTreeSet::new();
    for id in &manifest.samples {
        if !seen.insert(id) {
            return Err(bad(id, "listed twice in the manifest"));
        }
    }
    manifest.samples.iter().map(|id| load_sample(root, id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssr::mask_to_png;
    use image::Rgb;

    fn write_sample(root: &Path, id: &str, with_ref: bool) {
        let dir = root.join(id);
        std::fs::create_dir_all(&dir).unwrap();
        let img = RgbImage::from_pixel(6, 5, Rgb([9, 9, 9]));
        raster::save_png(&img, &dir.join("image.png")).unwrap();
        std::fs::write(dir.join("query.txt"), "remove the cup\n").unwrap();
        let m = BinaryMask::from_fn(6, 5, |x, _| x < 2).unwrap();
        mask_to_png(&m).save(dir.join("mask.png")).unwrap();
        if with_ref {
            raster::save_png(&img, &dir.join("reference.png")).unwrap();
        }
    }

    #[test]
    fn loads_in_manifest_order() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "b", true);
        write_sample(dir.path(), "a", false);
        std::fs::write(dir.path().join(MANIFEST_FILE), r#"{"samples": ["b", "a"]}"#).unwrap();
        let samples = load_dataset(dir.path()).unwrap();
        assert_eq!(samples.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(samples[0].query, "remove the cup");
        assert_eq!(samples[0].gt_mask.area(), 10);
        assert!(samples[0].reference.is_some() && samples[1].reference.is_none());
    }

    #[test]
    fn errors_name_the_sample() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "ok", false);
        std::fs::write(dir.path().join(MANIFEST_FILE), r#"{"samples": ["ok", "gone"]}"#).unwrap();
        match load_dataset(dir.path()) {
            Err(EvalError::Dataset { sample, .. }) => assert_eq!(sample, "gone"),
            other => panic!("{other:?}"),
        }
        std::fs::remove_file(dir.path().join("ok/query.txt")).unwrap();
        std::fs::write(dir.path().join("ok/query.txt"), "  \n").unwrap();
        std::fs::write(dir.path().join(MANIFEST_FILE), r#"{"samples": ["ok"]}"#).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EvalError::Dataset { .. })));
        std::fs::write(dir.path().join(MANIFEST_FILE), r#"{"samples": ["ok", "ok"]}"#).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EvalError::Dataset { .. })));
    }

    #[test]
    fn missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EvalError::Io(_))));
    }
}
