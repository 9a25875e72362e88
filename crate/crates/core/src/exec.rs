//! Applies resolved edit steps with the inpainting backend.

use std::path::Path;
use std::time::Instant;

use image::RgbImage;

use crate::canonical::Canon;
use crate::gateway::{Gateway, GatewayError};
use crate::raster;
use crate::reasoning::EditStep;
use crate::ssr::{mask_to_png, BinaryMask};

/// Square dilation of the given radius; radius 0 returns the mask unchanged.
pub fn dilate_mask(mask: &BinaryMask, factor: u32) -> BinaryMask {
    mask.dilate(factor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intermediate {
    /// 1-based step index.
    pub step: usize,
    pub input: RgbImage,
    /// Dilated mask actually sent to the inpainter.
    pub mask: BinaryMask,
    pub output: RgbImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditResult {
    pub final_image: RgbImage,
    pub intermediates: Vec<Intermediate>,
    /// Wall-clock seconds per step.
    pub timings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("edit plan has no steps")]
    EmptyPlan,
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: GatewayError,
        /// Steps that finished before the failure.
        completed: Vec<Intermediate>,
    },
}

/// Inpaints the dilated step mask, sending the step's inpaint prompt. The
/// gateway enforces the preservation contract.
pub fn execute_step(
    image: &RgbImage,
    step: &EditStep,
    gw: &Gateway,
    dilation: u32,
) -> Result<RgbImage, GatewayError> {
    gw.inpaint(image, &dilate_mask(&step.mask, dilation), &step.inpaint_prompt)
}

/// Runs the steps in order, each on the previous step's output.
pub fn execute_plan(
    image: &RgbImage,
    steps: &[EditStep],
    gw: &Gateway,
    dilation: u32,
) -> Result<EditResult, ExecError> {
    if steps.is_empty() {
        return Err(ExecError::EmptyPlan);
    }
    let mut current = image.clone();
    let mut intermediates = Vec::with_capacity(steps.len());
    let mut timings = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        let started = Instant::now();
        let mask = dilate_mask(&step.mask, dilation);
        let output = match gw.inpaint(&current, &mask, &step.inpaint_prompt) {
            Ok(out) => out,
            Err(source) => {
                return Err(ExecError::Step {
                    step: i + 1,
                    source,
                    completed: intermediates,
                })
            }
        };
        timings.push(started.elapsed().as_secs_f64());
        intermediates.push(Intermediate {
            step: i + 1,
            input: current,
            mask,
            output: output.clone(),
        });
        current = output;
    }
    Ok(EditResult {
        final_image: current,
        intermediates,
        timings,
    })
}

/// Writes `step_NN_{input,mask,output}.png` per step plus `manifest.json`.
/// The manifest leaves timings out so reruns produce identical bytes.
pub fn save_intermediates(
    intermediates: &[Intermediate],
    steps: &[EditStep],
    dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let io = |e: raster::RasterError| std::io::Error::other(e.to_string());
    let mut entries = Vec::new();
    for (im, step) in intermediates.iter().zip(steps) {
        let stem = format!("step_{:02}", im.step);
        let input = format!("{stem}_input.png");
        let mask = format!("{stem}_mask.png");
        let output = format!("{stem}_output.png");
        raster::save_png(&im.input, &dir.join(&input)).map_err(io)?;
        mask_to_png(&im.mask)
            .save_with_format(dir.join(&mask), image::ImageFormat::Png)
            .map_err(std::io::Error::other)?;
        raster::save_png(&im.output, &dir.join(&output)).map_err(io)?;
        entries.push(Canon::object([
            ("input", Canon::str(input)),
            ("inpaint_prompt", Canon::str(step.inpaint_prompt.clone())),
            ("instruction", Canon::str(step.explicit_instruction.clone())),
            ("mask", Canon::str(mask)),
            ("mask_area", Canon::Int(im.mask.area() as i64)),
            ("op", Canon::str(step.op_kind.name())),
            ("output", Canon::str(output)),
            ("step", Canon::Int(im.step as i64)),
            (
                "target_ids",
                Canon::Array(step.target_ids.iter().map(|&i| Canon::Int(i.into())).collect()),
            ),
        ]));
    }
    let manifest = Canon::object([("steps", Canon::Array(entries))]);
    std::fs::write(dir.join("manifest.json"), manifest.to_pretty())
}
