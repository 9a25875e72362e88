//! Dense-bitmap oracles and random instance generators shared by the
//! property and acceptance suites.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;
use reasonedit_core::canonical::quantize6;
use reasonedit_core::ssr::{AttrValue, BinaryMask, BoundingBox, DepthMap, Detection, SceneObject, SceneRep};

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: u32,
    pub h: u32,
    pub px: Vec<bool>,
}

impl Dense {
    pub fn of(m: &BinaryMask) -> Dense {
        let mut px = vec![false; (m.width() * m.height()) as usize];
        for y in 0..m.height() {
            for x in 0..m.width() {
                px[(y * m.width() + x) as usize] = m.get(x, y);
            }
        }
        Dense { w: m.width(), h: m.height(), px }
    }

    pub fn of_box(w: u32, h: u32, b: &BoundingBox) -> Dense {
        let mut px = vec![false; (w * h) as usize];
        for y in b.y_min..=b.y_max {
            for x in b.x_min..=b.x_max {
                px[(y * w + x) as usize] = true;
            }
        }
        Dense { w, h, px }
    }

    pub fn count(&self) -> u64 {
        self.px.iter().filter(|&&p| p).count() as u64
    }

    pub fn and_count(&self, o: &Dense) -> u64 {
        self.px.iter().zip(&o.px).filter(|(a, b)| **a && **b).count() as u64
    }

    pub fn or(&self, o: &Dense) -> Dense {
        Dense {
            w: self.w,
            h: self.h,
            px: self.px.iter().zip(&o.px).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn to_mask(&self) -> BinaryMask {
        BinaryMask::from_bits(self.w, self.h, &self.px).unwrap()
    }

    /// Some pixel of `self` equals or is 8-adjacent to some pixel of `o`.
    pub fn touches(&self, o: &Dense) -> bool {
        let (w, h) = (self.w as i64, self.h as i64);
        for y in 0..h {
            for x in 0..w {
                if !self.px[(y * w + x) as usize] {
                    continue;
                }
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < w && ny < h && o.px[(ny * w + nx) as usize] {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

pub fn iou_oracle(a: &Dense, b: &Dense) -> f64 {
    let inter = a.and_count(b);
    let union = a.count() + b.count() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Best detection by IoU, then score, then lower index; kept when the IoU is
/// positive and at least `tau`.
pub fn label_oracle(mask: &Dense, dets: &[Detection], tau: f64) -> Option<String> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (j, d) in dets.iter().enumerate() {
        let iou = iou_oracle(mask, &Dense::of_box(mask.w, mask.h, &d.bbox));
        let take = match best {
            None => true,
            Some((bi, bs, _)) => iou > bi || (iou == bi && d.score > bs),
        };
        if take {
            best = Some((iou, d.score, j));
        }
    }
    best.filter(|&(iou, _, _)| iou > 0.0 && iou >= tau)
        .map(|(_, _, j)| dets[j].label.clone())
}

/// (label, dense mask) per merged object, in output order.
pub fn merge_oracle(objects: &[(Option<String>, Dense)]) -> Vec<(Option<String>, Dense)> {
    let n = objects.len();
    let mut group = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if group[start] != usize::MAX {
            continue;
        }
        let g = out.len();
        group[start] = g;
        let mut members = vec![start];
        if objects[start].0.is_some() {
            // flood over the "same label and touching" graph
            let mut frontier = vec![start];
            while let Some(i) = frontier.pop() {
                for j in 0..n {
                    if group[j] == usize::MAX
                        && objects[j].0 == objects[i].0
                        && objects[i].1.touches(&objects[j].1)
                    {
                        group[j] = g;
                        members.push(j);
                        frontier.push(j);
                    }
                }
            }
        }
        members.sort();
        let mut mask = objects[members[0]].1.clone();
        for &m in &members[1..] {
            mask = mask.or(&objects[m].1);
        }
        out.push((objects[start].0.clone(), mask));
    }
    out
}

pub fn median_oracle(mask: &Dense, depth: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = mask
        .px
        .iter()
        .zip(depth)
        .filter(|(m, _)| **m)
        .map(|(_, d)| *d)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Union of a few rectangles plus sparse noise; sometimes empty or full.
pub fn random_dense(rng: &mut StdRng, w: u32, h: u32) -> Dense {
    let mut px = vec![false; (w * h) as usize];
    match rng.gen_range(0..20) {
        0 => {}
        1 => px.iter_mut().for_each(|p| *p = true),
        _ => {
            for _ in 0..rng.gen_range(1..4) {
                let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
                let (x1, y1) = (rng.gen_range(x0..w), rng.gen_range(y0..h));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        px[(y * w + x) as usize] = true;
                    }
                }
            }
            let noise = rng.gen_range(0.0..0.08);
            for p in px.iter_mut() {
                if rng.gen_bool(noise) {
                    *p = !*p;
                }
            }
        }
    }
    Dense { w, h, px }
}

pub fn random_box(rng: &mut StdRng, w: u32, h: u32) -> BoundingBox {
    let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
    let (x1, y1) = (rng.gen_range(x0..w), rng.gen_range(y0..h));
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

const LABELS: [&str; 4] = ["cup", "plate", "lamp", "book"];

pub fn random_detections(rng: &mut StdRng, w: u32, h: u32) -> Vec<Detection> {
    (0..rng.gen_range(0..5))
        .map(|_| {
            let score = [0.5, 0.9, rng.gen_range(0.0..1.0)][rng.gen_range(0..3)];
            Detection::new(random_box(rng, w, h), LABELS[rng.gen_range(0..LABELS.len())], score)
        })
        .collect()
}

pub fn random_label(rng: &mut StdRng) -> Option<String> {
    match rng.gen_range(0..6) {
        0 => None,
        1 => Some("say \"cheese\" \\ ünïcödé\ttab\n".to_string()),
        _ => Some(LABELS[rng.gen_range(0..LABELS.len())].to_string()),
    }
}

pub fn random_depth(rng: &mut StdRng, w: u32, h: u32) -> DepthMap {
    let levels = rng.gen_range(1..6);
    let values = (0..w * h)
        .map(|_| rng.gen_range(0..=levels) as f64 / levels as f64)
        .collect();
    DepthMap::new(w, h, values).unwrap()
}

fn random_attr(rng: &mut StdRng) -> AttrValue {
    let q = |rng: &mut StdRng| quantize6(rng.gen_range(-1e4..1e4));
    match rng.gen_range(0..5) {
        0 => AttrValue::Bool(rng.gen()),
        1 => AttrValue::Number(q(rng)),
        2 => AttrValue::Point(q(rng), q(rng)),
        3 => AttrValue::Object(rng.gen_range(1..50)),
        _ => AttrValue::Text(random_label(rng).unwrap_or_default()),
    }
}

/// Scene with quantized floats, so the JSON form is exact.
pub fn random_scene(rng: &mut StdRng) -> SceneRep {
    let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
    let mut objects = Vec::new();
    let mut id = 0;
    for _ in 0..rng.gen_range(0..7) {
        let d = random_dense(rng, w, h);
        if d.count() == 0 {
            continue;
        }
        id += rng.gen_range(1..4);
        let mut o = SceneObject::new(id, d.to_mask(), random_label(rng));
        if rng.gen_bool(0.7) {
            o.depth = Some(quantize6(rng.gen_range(0.0..=1.0)));
        }
        for k in 0..rng.gen_range(0..3) {
            o.attrs.insert(format!("attr_{k}"), random_attr(rng));
        }
        objects.push(o);
    }
    let mut scene = SceneRep::new(w, h, objects).unwrap();
    for k in 0..rng.gen_range(0..3) {
        scene.attrs.insert(format!("scene_{k}"), random_attr(rng));
    }
    for _ in 0..rng.gen_range(0..3) {
        scene.bump_revision();
    }
    scene
}

/// SSIM straight from the definition: every valid 11x11 window, Gaussian
/// weights (sigma 1.5) summed in 2-D, averaged over windows and channels.
pub fn ssim_oracle(a: &image::RgbImage, b: &image::RgbImage) -> f64 {
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut g = [[0.0f64; 11]; 11];
    let mut total_w = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / 4.5).exp();
            total_w += *v;
        }
    }
    let (w, h) = (a.width(), a.height());
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in 0..3 {
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let mut m = [0.0f64; 5];
                for (i, row) in g.iter().enumerate() {
                    for (j, gw) in row.iter().enumerate() {
                        let wt = gw / total_w;
                        let p = a.get_pixel(x0 + j as u32, y0 + i as u32)[c] as f64;
                        let q = b.get_pixel(x0 + j as u32, y0 + i as u32)[c] as f64;
                        m[0] += wt * p;
                        m[1] += wt * q;
                        m[2] += wt * p * p;
                        m[3] += wt * q * q;
                        m[4] += wt * p * q;
                    }
                }
                let (vx, vy, cv) = (m[2] - m[0] * m[0], m[3] - m[1] * m[1], m[4] - m[0] * m[1]);
                sum += ((2.0 * m[0] * m[1] + c1) * (2.0 * cv + c2))
                    / ((m[0] * m[0] + m[1] * m[1] + c1) * (vx + vy + c2));
                n += 1;
            }
        }
    }
    sum / n as f64
}
