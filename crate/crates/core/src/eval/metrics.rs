//! Pixel-space metrics over RGB images.

use image::RgbImage;

use super::EvalError;
use crate::ssr::BinaryMask;

/// PSNR reported for identical pixels (zero MSE).
pub const PSNR_CAP: f64 = 100.0;

pub(crate) fn check_pair(a: &RgbImage, b: &RgbImage, region: Option<&BinaryMask>) -> Result<(), EvalError> {
    if a.dimensions() != b.dimensions() {
        return Err(EvalError::Shape(format!(
            "images are {:?} and {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    if let Some(m) = region {
        if (m.width(), m.height()) != a.dimensions() {
            return Err(EvalError::Shape(format!(
                "region is {}x{}, images are {:?}",
                m.width(),
                m.height(),
                a.dimensions()
            )));
        }
    }
    Ok(())
}

/// Mean squared channel difference over the region (or every pixel).
fn mse(a: &RgbImage, b: &RgbImage, region: Option<&BinaryMask>) -> Result<f64, EvalError> {
    check_pair(a, b, region)?;
    let mut sum = 0u64;
    let mut n = 0u64;
    let mut add = |x: u32, y: u32| {
        let (p, q) = (a.get_pixel(x, y).0, b.get_pixel(x, y).0);
        for c in 0..3 {
            let d = p[c] as i64 - q[c] as i64;
            sum += (d * d) as u64;
        }
        n += 3;
    };
    match region {
        Some(m) => m.pixels().for_each(|(x, y)| add(x, y)),
        None => {
            for y in 0..a.height() {
                for x in 0..a.width() {
                    add(x, y)
                }
            }
        }
    }
    if n == 0 {
        return Err(EvalError::EmptyRegion);
    }
    Ok(sum as f64 / n as f64)
}

/// Peak signal-to-noise ratio in dB with peak 255, capped at [`PSNR_CAP`].
pub fn psnr(a: &RgbImage, b: &RgbImage, region: Option<&BinaryMask>) -> Result<f64, EvalError> {
    let e = mse(a, b, region)?;
    if e == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0f64 * 255.0 / e).log10()).min(PSNR_CAP))
}

fn mean_abs_pow(a: &RgbImage, b: &RgbImage, square: bool) -> Result<f64, EvalError> {
    check_pair(a, b, None)?;
    if a.as_raw().is_empty() {
        return Err(EvalError::EmptyRegion);
    }
    let total: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&p, &q)| {
            let d = (p as f64 - q as f64).abs() / 255.0;
            if square {
                d * d
            } else {
                d
            }
        })
        .sum();
    Ok(total / a.as_raw().len() as f64)
}

/// Mean absolute channel difference on the [0, 1] scale.
pub fn l1(a: &RgbImage, b: &RgbImage) -> Result<f64, EvalError> {
    mean_abs_pow(a, b, false)
}

/// Mean squared channel difference on the [0, 1] scale.
pub fn l2(a: &RgbImage, b: &RgbImage) -> Result<f64, EvalError> {
    mean_abs_pow(a, b, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn flat(v: u8) -> RgbImage {
        RgbImage::from_pixel(8, 8, Rgb([v, v, v]))
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr(&flat(100), &flat(100), None).unwrap(), PSNR_CAP);
        // MSE 256: 10 log10(65025 / 256)
        let v = psnr(&flat(0), &flat(16), None).unwrap();
        assert!((v - 24.048_5).abs() < 1e-4, "{v}");
        assert!((psnr(&flat(0), &flat(255), None).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn psnr_region() {
        let mut b = flat(0);
        b.put_pixel(0, 0, Rgb([255, 255, 255]));
        let elsewhere = BinaryMask::from_fn(8, 8, |x, y| (x, y) != (0, 0)).unwrap();
        assert_eq!(psnr(&flat(0), &b, Some(&elsewhere)).unwrap(), PSNR_CAP);
        let empty = BinaryMask::empty(8, 8).unwrap();
        assert_eq!(psnr(&flat(0), &b, Some(&empty)), Err(EvalError::EmptyRegion));
        let wrong = BinaryMask::full(4, 4).unwrap();
        assert!(matches!(psnr(&flat(0), &b, Some(&wrong)), Err(EvalError::Shape(_))));
    }

    #[test]
    fn l1_l2() {
        assert_eq!(l1(&flat(0), &flat(0)).unwrap(), 0.0);
        assert!((l1(&flat(0), &flat(51)).unwrap() - 0.2).abs() < 1e-12);
        assert!((l2(&flat(0), &flat(51)).unwrap() - 0.04).abs() < 1e-12);
        assert!(matches!(l1(&flat(0), &RgbImage::new(2, 2)), Err(EvalError::Shape(_))));
    }
}
