//! Run-length encoded binary masks and inclusive bounding boxes.
//!
//! Runs follow the COCO convention: counts over row-major pixel order that
//! alternate background/foreground, always starting with a (possibly empty)
//! background run. Encodings are canonical, so a given raster has exactly one
//! run list and equal masks compare equal structurally.

use serde::{Deserialize, Serialize};

use super::SsrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, SsrError> {
        if x_min > x_max || y_min > y_max {
            return Err(SsrError::Shape(format!(
                "inverted box [{x_min}, {y_min}, {x_max}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x_max < width && self.y_max < height
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x_min = self.x_min.max(other.x_min);
        let y_min = self.y_min.max(other.y_min);
        let x_max = self.x_max.min(other.x_max);
        let y_max = self.y_max.min(other.y_max);
        (x_min <= x_max && y_min <= y_max).then_some(BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }
}

impl TryFrom<[u32; 4]> for BoundingBox {
    type Error = SsrError;

    fn try_from(v: [u32; 4]) -> Result<Self, SsrError> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [u32; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMask")]
pub struct BinaryMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl TryFrom<RawMask> for BinaryMask {
    type Error = SsrError;

    fn try_from(raw: RawMask) -> Result<Self, SsrError> {
        BinaryMask::from_runs(raw.width, raw.height, raw.runs)
    }
}

/// Half-open `[start, end)` span of foreground pixels in row-major order.
pub type Span = (u32, u32);

fn pixel_count(width: u32, height: u32) -> Result<u32, SsrError> {
    if width == 0 || height == 0 {
        return Err(SsrError::MalformedMask(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    width.checked_mul(height).ok_or_else(|| {
        SsrError::MalformedMask(format!("{width}x{height} exceeds the addressable pixel count"))
    })
}

impl BinaryMask {
    /// Validates a run list. Rejects sums that differ from `width * height`
    /// and zero-length runs anywhere but the leading background run.
    pub fn from_runs(width: u32, height: u32, runs: Vec<u32>) -> Result<Self, SsrError> {
        let total = pixel_count(width, height)?;
        if runs.is_empty() {
            return Err(SsrError::MalformedMask("empty run list".into()));
        }
        if let Some(i) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(SsrError::MalformedMask(format!("run {} has zero length", i + 1)));
        }
        let sum: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        if sum != u64::from(total) {
            return Err(SsrError::MalformedMask(format!(
                "runs sum to {sum}, expected {width}x{height} = {total}"
            )));
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, SsrError> {
        let total = pixel_count(width, height)?;
        Ok(Self {
            width,
            height,
            runs: vec![total],
        })
    }

    pub fn full(width: u32, height: u32) -> Result<Self, SsrError> {
        let total = pixel_count(width, height)?;
        Ok(Self {
            width,
            height,
            runs: vec![0, total],
        })
    }

    /// Encodes a dense row-major raster.
    pub fn from_bits(width: u32, height: u32, bits: &[bool]) -> Result<Self, SsrError> {
        let total = pixel_count(width, height)?;
        if bits.len() != total as usize {
            return Err(SsrError::Shape(format!(
                "raster has {} pixels, expected {width}x{height}",
                bits.len()
            )));
        }
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &b in bits {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, SsrError> {
        pixel_count(width, height)?;
        let bits: Vec<bool> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::from_bits(width, height, &bits)
    }

    /// Builds a mask from sorted, non-overlapping spans. Touching spans are
    /// coalesced so the result stays canonical.
    pub fn from_spans(
        width: u32,
        height: u32,
        spans: impl IntoIterator<Item = Span>,
    ) -> Result<Self, SsrError> {
        let total = pixel_count(width, height)?;
        let mut runs = Vec::new();
        let mut cursor = 0u32;
        for (start, end) in spans {
            if start >= end {
                continue;
            }
            if start < cursor || end > total {
                return Err(SsrError::MalformedMask(format!(
                    "span [{start}, {end}) out of order or out of bounds"
                )));
            }
            if start == cursor && !runs.is_empty() {
                *runs.last_mut().expect("nonempty") += end - start;
            } else {
                runs.push(start - cursor);
                runs.push(end - start);
            }
            cursor = end;
        }
        if cursor < total || runs.is_empty() {
            runs.push(total - cursor);
        }
        Ok(Self {
            width,
            height,
            runs,
        })
    }

    /// Rasterizes a box as a filled rectangle.
    pub fn from_box(width: u32, height: u32, b: &BoundingBox) -> Result<Self, SsrError> {
        pixel_count(width, height)?;
        if !b.fits(width, height) {
            return Err(SsrError::Shape(format!(
                "box {:?} exceeds {width}x{height}",
                <[u32; 4]>::from(*b)
            )));
        }
        Self::from_spans(width, height, box_spans(width, b))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, width: u32, height: u32) -> Result<(), SsrError> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(SsrError::Shape(format!(
                "mask is {}x{}, expected {width}x{height}",
                self.width, self.height
            )))
        }
    }

    /// Foreground spans in row-major order.
    pub fn spans(&self) -> impl Iterator<Item = Span> + '_ {
        let mut pos = 0u32;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = pos;
            pos += r;
            (i % 2 == 1).then_some((start, pos))
        })
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity((self.width * self.height) as usize);
        for (i, &r) in self.runs.iter().enumerate() {
            bits.extend(std::iter::repeat(i % 2 == 1).take(r as usize));
        }
        bits
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).map(|&r| u64::from(r)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.len() == 1
    }

    pub fn is_full(&self) -> bool {
        self.runs.len() == 2 && self.runs[0] == 0
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let idx = y * self.width + x;
        self.spans()
            .take_while(|&(start, _)| start <= idx)
            .any(|(start, end)| idx >= start && idx < end)
    }

    /// Foreground pixel coordinates `(x, y)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.spans()
            .flat_map(|(s, e)| s..e)
            .map(move |idx| (idx % w, idx / w))
    }

    pub fn bbox(&self) -> Option<BoundingBox> {
        let mut acc: Option<BoundingBox> = None;
        for (start, end) in self.spans() {
            let (y0, y1) = (start / self.width, (end - 1) / self.width);
            let (x0, x1) = if y0 == y1 {
                (start % self.width, (end - 1) % self.width)
            } else {
                (0, self.width - 1)
            };
            acc = Some(match acc {
                None => BoundingBox {
                    x_min: x0,
                    y_min: y0,
                    x_max: x1,
                    y_max: y1,
                },
                Some(b) => BoundingBox {
                    x_min: b.x_min.min(x0),
                    y_min: b.y_min.min(y0),
                    x_max: b.x_max.max(x1),
                    y_max: b.y_max.max(y1),
                },
            });
        }
        acc
    }

    /// Mean `(x, y)` of foreground pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let n = self.area();
        if n == 0 {
            return None;
        }
        let (mut sx, mut sy) = (0f64, 0f64);
        for (x, y) in self.pixels() {
            sx += f64::from(x);
            sy += f64::from(y);
        }
        Some((sx / n as f64, sy / n as f64))
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<u64, SsrError> {
        self.shape_guard(other)?;
        Ok(span_intersection(self.spans(), other.spans())
            .map(|(s, e)| u64::from(e - s))
            .sum())
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, SsrError> {
        self.shape_guard(other)?;
        let merged = span_union(self.spans(), other.spans());
        Self::from_spans(self.width, self.height, merged)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, SsrError> {
        self.shape_guard(other)?;
        let spans: Vec<Span> = span_intersection(self.spans(), other.spans()).collect();
        Self::from_spans(self.width, self.height, spans)
    }

    pub fn complement(&self) -> BinaryMask {
        let mut runs = if self.runs[0] == 0 {
            self.runs[1..].to_vec()
        } else {
            let mut r = Vec::with_capacity(self.runs.len() + 1);
            r.push(0);
            r.extend_from_slice(&self.runs);
            r
        };
        if runs.len() > 1 && *runs.last().expect("nonempty") == 0 {
            runs.pop();
        }
        BinaryMask {
            width: self.width,
            height: self.height,
            runs,
        }
    }

    /// `true` when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, SsrError> {
        Ok(self.intersection_area(other)? == self.area())
    }

    /// Morphological dilation with a `(2r+1)x(2r+1)` square structuring
    /// element. Radius 0 returns the mask unchanged.
    pub fn dilate(&self, radius: u32) -> BinaryMask {
        if radius == 0 || self.is_empty() || self.is_full() {
            return self.clone();
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let r = radius as usize;
        let bits = self.to_bits();
        let mut horizontal = vec![false; w * h];
        for y in 0..h {
            let row = &bits[y * w..(y + 1) * w];
            // prefix counts make each window query O(1)
            let mut prefix = vec![0u32; w + 1];
            for x in 0..w {
                prefix[x + 1] = prefix[x] + u32::from(row[x]);
            }
            for x in 0..w {
                let lo = x.saturating_sub(r);
                let hi = (x + r + 1).min(w);
                horizontal[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            let mut prefix = vec![0u32; h + 1];
            for y in 0..h {
                prefix[y + 1] = prefix[y] + u32::from(horizontal[y * w + x]);
            }
            for y in 0..h {
                let lo = y.saturating_sub(r);
                let hi = (y + r + 1).min(h);
                out[y * w + x] = prefix[hi] > prefix[lo];
            }
        }
        Self::from_bits(self.width, self.height, &out).expect("dimensions already validated")
    }

    /// Overlap or 8-connected contact between two masks.
    pub fn touches(&self, other: &BinaryMask) -> Result<bool, SsrError> {
        self.shape_guard(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(false);
        }
        Ok(self.dilate(1).intersection_area(other)? > 0)
    }

    fn shape_guard(&self, other: &BinaryMask) -> Result<(), SsrError> {
        other.check_shape(self.width, self.height)
    }
}

/// Row-major spans covered by an in-bounds box.
pub(crate) fn box_spans(width: u32, b: &BoundingBox) -> impl Iterator<Item = Span> + '_ {
    let full_rows = b.x_min == 0 && b.x_max == width - 1;
    let rows: Box<dyn Iterator<Item = Span>> = if full_rows {
        Box::new(std::iter::once((
            b.y_min * width,
            (b.y_max + 1) * width,
        )))
    } else {
        Box::new(
            (b.y_min..=b.y_max).map(move |y| (y * width + b.x_min, y * width + b.x_max + 1)),
        )
    };
    rows
}

pub(crate) fn span_intersection<A, B>(a: A, b: B) -> impl Iterator<Item = Span>
where
    A: Iterator<Item = Span>,
    B: Iterator<Item = Span>,
{
    let mut a = a.peekable();
    let mut b = b.peekable();
    std::iter::from_fn(move || loop {
        let (&(s1, e1), &(s2, e2)) = (a.peek()?, b.peek()?);
        let start = s1.max(s2);
        let end = e1.min(e2);
        if e1 <= e2 {
            a.next();
        } else {
            b.next();
        }
        if start < end {
            return Some((start, end));
        }
    })
}

fn span_union<A, B>(a: A, b: B) -> Vec<Span>
where
    A: Iterator<Item = Span>,
    B: Iterator<Item = Span>,
{
    let mut all: Vec<Span> = a.chain(b).collect();
    all.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(all.len());
    for (s, e) in all {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}
