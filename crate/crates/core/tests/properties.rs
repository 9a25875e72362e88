mod support;

use std::sync::Arc;

use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use reasonedit_core::eval::{psnr, ssim};
use reasonedit_core::exec::dilate_mask;
use reasonedit_core::gateway::mock::FillInpainter;
use reasonedit_core::gateway::{Gateway, GatewayError, Inpainter, Preservation};
use reasonedit_core::ssr::{region_iou, ssr_parse, ssr_serialize, BinaryMask};
use support::*;

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn random_image(r: &mut StdRng, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([r.gen(), r.gen(), r.gen()]))
}

/// Paints the mask with `fill` and nudges one chosen pixel by `delta`.
struct Nudge {
    at: (u32, u32),
    delta: u8,
}

impl Inpainter for Nudge {
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask, _: &str) -> Result<RgbImage, GatewayError> {
        let mut out = FillInpainter::new([1, 2, 3]).inpaint(image, mask, "")?;
        let p = out.get_pixel_mut(self.at.0, self.at.1);
        p[0] = p[0].wrapping_add(self.delta);
        Ok(out)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mask_encodings_round_trip(seed: u64, w in 1u32..40, h in 1u32..40) {
        let d = random_dense(&mut rng(seed), w, h);
        let m = d.to_mask();
        prop_assert_eq!(Dense::of(&m), d.clone());
        prop_assert_eq!(m.area(), d.count());
        prop_assert_eq!(BinaryMask::from_runs(w, h, m.runs().to_vec()).unwrap(), m.clone());
        let json = serde_json::to_string(&m).unwrap();
        prop_assert_eq!(serde_json::from_str::<BinaryMask>(&json).unwrap(), m);
    }

    #[test]
    fn mask_algebra_matches_dense(seed: u64) {
        let mut r = rng(seed);
        let (a, b) = (random_dense(&mut r, 32, 32), random_dense(&mut r, 32, 32));
        let (ma, mb) = (a.to_mask(), b.to_mask());
        prop_assert_eq!(Dense::of(&ma.union(&mb).unwrap()), a.or(&b));
        prop_assert_eq!(ma.intersection_area(&mb).unwrap(), a.and_count(&b));
        prop_assert_eq!(ma.complement().area(), 32 * 32 - a.count());
        let iou = region_iou(&ma, &mb).unwrap();
        prop_assert_eq!(iou, region_iou(&mb, &ma).unwrap());
        prop_assert!((0.0..=1.0).contains(&iou));
        if a.count() > 0 {
            prop_assert_eq!(region_iou(&ma, &ma).unwrap(), 1.0);
        }
        prop_assert_eq!(ma.touches(&mb).unwrap(), a.touches(&b));
    }

    #[test]
    fn dilation_is_monotone(seed: u64, radius in 0u32..5) {
        let d = random_dense(&mut rng(seed), 24, 20);
        let m = d.to_mask();
        prop_assert_eq!(dilate_mask(&m, 0), m.clone());
        let small = dilate_mask(&m, radius);
        let big = dilate_mask(&m, radius + 1);
        prop_assert!(m.is_subset_of(&small).unwrap());
        prop_assert!(small.is_subset_of(&big).unwrap());
        // Chebyshev-ball oracle
        let r = radius as i64;
        for y in 0..20i64 {
            for x in 0..24i64 {
                let expect = (-r..=r).any(|dy| (-r..=r).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    (0..24).contains(&nx) && (0..20).contains(&ny) && d.px[(ny * 24 + nx) as usize]
                }));
                prop_assert_eq!(small.get(x as u32, y as u32), expect);
            }
        }
    }

    #[test]
    fn scene_json_round_trips(seed: u64) {
        let scene = random_scene(&mut rng(seed));
        let text = ssr_serialize(&scene);
        let back = ssr_parse(&text).unwrap();
        prop_assert_eq!(&back, &scene);
        prop_assert_eq!(ssr_serialize(&back), text);
    }

    #[test]
    fn metric_symmetry_and_full_region(seed: u64, w in 11u32..20, h in 11u32..20) {
        let mut r = rng(seed);
        let (a, b) = (random_image(&mut r, w, h), random_image(&mut r, w, h));
        let full = BinaryMask::full(w, h).unwrap();
        prop_assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
        prop_assert_eq!(psnr(&a, &b, Some(&full)).unwrap(), psnr(&a, &b, None).unwrap());
        let s = ssim(&a, &b, None).unwrap();
        prop_assert!((s - ssim(&b, &a, None).unwrap()).abs() < 1e-12);
        prop_assert_eq!(ssim(&a, &b, Some(&full)).unwrap(), s);
        prop_assert_eq!(ssim(&a, &a, None).unwrap(), 1.0);
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed: u64, amp in 1u8..60) {
        let mut r = rng(seed);
        let base = RgbImage::from_fn(12, 12, |_, _| Rgb([r.gen_range(60..190), r.gen_range(60..190), 128]));
        let shifted = |k: u8| RgbImage::from_fn(12, 12, |x, y| {
            let p = base.get_pixel(x, y);
            Rgb([p[0] + k, p[1] + k, p[2] + k])
        });
        let lo = psnr(&base, &shifted(amp), None).unwrap();
        let hi = psnr(&base, &shifted(amp + 1), None).unwrap();
        prop_assert!(hi < lo);
    }

    #[test]
    fn preservation_contract(seed: u64, delta in 1u8..6) {
        let mut r = rng(seed);
        let img = random_image(&mut r, 16, 12);
        let d = random_dense(&mut r, 16, 12);
        prop_assume!(d.count() > 0 && d.count() < 16 * 12);
        let mask = d.to_mask();
        let strict = Gateway::new()
            .with_inpainter(Arc::new(FillInpainter::new([1, 2, 3])))
            .with_preservation(Preservation::Strict);
        let out = strict.inpaint(&img, &mask, "p").unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            if !mask.get(x, y) {
                prop_assert_eq!(p, img.get_pixel(x, y));
            }
        }
        let outside = mask.complement().pixels().next().unwrap();
        let leaky = Arc::new(Nudge { at: outside, delta });
        let strict = Gateway::new().with_inpainter(leaky.clone()).with_preservation(Preservation::Strict);
        let leaked = matches!(strict.inpaint(&img, &mask, "p"), Err(GatewayError::EditLeakage { .. }));
        // a wrapped channel value is also a leak
        prop_assert!(leaked);
        let lenient = Gateway::new().with_inpainter(leaky).with_preservation(Preservation::Lenient { tolerance: 3 });
        let p = img.get_pixel(outside.0, outside.1)[0];
        let moved = p.abs_diff(p.wrapping_add(delta));
        prop_assert_eq!(lenient.inpaint(&img, &mask, "p").is_ok(), moved <= 3);
    }
}
