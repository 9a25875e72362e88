//! Gaussian-window SSIM, optionally restricted to a region.
//!
//! Windows are the `SSIM_WINDOW` square "valid" positions (no padding). With
//! a region, only windows centred on region pixels are averaged, and each
//! window's statistics use only its region pixels, with the Gaussian weights
//! renormalized over them. Without a region this is plain SSIM.

use image::RgbImage;

use super::metrics::check_pair;
use super::EvalError;
use crate::ssr::BinaryMask;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn kernel() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering of a `w x h` plane.
fn filter(plane: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..]).map(|(g, v)| g * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(v, g)| g * tmp[(y + v) * ow + x])
                .sum();
        }
    }
    out
}

/// Channel-averaged SSIM. Fails with `Shape` on mismatched sizes or images
/// smaller than the window, and with `EmptyRegion` when no window centre
/// falls in the region.
pub fn ssim(a: &RgbImage, b: &RgbImage, region: Option<&BinaryMask>) -> Result<f64, EvalError> {
    check_pair(a, b, region)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(EvalError::Shape(format!(
            "{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let k = kernel();
    let inside: Vec<f64> = match region {
        Some(m) => m.to_bits().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; w * h],
    };
    let weight = filter(&inside, w, h, &k);
    let (ow, oh) = (w + 1 - SSIM_WINDOW, h + 1 - SSIM_WINDOW);
    let half = SSIM_WINDOW / 2;
    let centres: Vec<usize> = (0..oh)
        .flat_map(|y| (0..ow).map(move |x| (x, y)))
        .filter(|&(x, y)| inside[(y + half) * w + x + half] > 0.0)
        .map(|(x, y)| y * ow + x)
        .collect();
    if centres.is_empty() {
        return Err(EvalError::EmptyRegion);
    }

    let (ra, rb) = (a.as_raw(), b.as_raw());
    let mut total = 0.0;
    for c in 0..3 {
        let plane = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            (0..w * h)
                .map(|i| inside[i] * f(ra[i * 3 + c] as f64, rb[i * 3 + c] as f64))
                .collect()
        };
        let sx = filter(&plane(&|x, _| x), w, h, &k);
        let sy = filter(&plane(&|_, y| y), w, h, &k);
        let sxx = filter(&plane(&|x, _| x * x), w, h, &k);
        let syy = filter(&plane(&|_, y| y * y), w, h, &k);
        let sxy = filter(&plane(&|x, y| x * y), w, h, &k);
        for &i in &centres {
            let n = weight[i];
            let (mx, my) = (sx[i] / n, sy[i] / n);
            let vx = sxx[i] / n - mx * mx;
            let vy = syy[i] / n - my * my;
            let cxy = sxy[i] / n - mx * my;
            total += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                / ((mx * mx + my * my + C1) * (vx + vy + C2));
        }
    }
    Ok(total / (3 * centres.len()) as f64)
}
