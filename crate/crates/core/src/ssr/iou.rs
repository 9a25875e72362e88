use super::mask::{box_spans, span_intersection};
use super::{BinaryMask, BoundingBox, SsrError};

/// Either operand of [`region_iou`]. Boxes are treated as filled rectangles.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Mask(&'a BinaryMask),
    Box(&'a BoundingBox),
}

impl<'a> From<&'a BinaryMask> for Region<'a> {
    fn from(m: &'a BinaryMask) -> Self {
        Region::Mask(m)
    }
}

impl<'a> From<&'a BoundingBox> for Region<'a> {
    fn from(b: &'a BoundingBox) -> Self {
        Region::Box(b)
    }
}

/// Intersection over union of two regions; 0 when the union is empty.
///
/// Mask operands must share dimensions and boxes must lie inside any mask
/// operand, otherwise a [`SsrError::Shape`] is returned.
pub fn region_iou<'a, 'b>(
    a: impl Into<Region<'a>>,
    b: impl Into<Region<'b>>,
) -> Result<f64, SsrError> {
    let (inter, area_a, area_b) = match (a.into(), b.into()) {
        (Region::Mask(a), Region::Mask(b)) => (a.intersection_area(b)?, a.area(), b.area()),
        (Region::Mask(m), Region::Box(b)) | (Region::Box(b), Region::Mask(m)) => {
            if !b.fits(m.width(), m.height()) {
                return Err(SsrError::Shape(format!(
                    "box {:?} exceeds mask {}x{}",
                    <[u32; 4]>::from(*b),
                    m.width(),
                    m.height()
                )));
            }
            let inter = span_intersection(m.spans(), box_spans(m.width(), b))
                .map(|(s, e)| u64::from(e - s))
                .sum();
            (inter, m.area(), b.area())
        }
        (Region::Box(a), Region::Box(b)) => {
            let inter = a.intersection(b).map_or(0, |i| i.area());
            (inter, a.area(), b.area())
        }
    };
    let union = area_a + area_b - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}
