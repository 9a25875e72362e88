use serde::{Deserialize, Serialize};

use super::{BinaryMask, SsrError};

/// Per-pixel relative depth in `[0, 1]`, row-major. Smaller is nearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDepth")]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDepth {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl TryFrom<RawDepth> for DepthMap {
    type Error = SsrError;

    fn try_from(raw: RawDepth) -> Result<Self, SsrError> {
        DepthMap::new(raw.width, raw.height, raw.values)
    }
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self, SsrError> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(SsrError::Shape(format!(
                "{} depth values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(SsrError::Shape(format!("depth value {v} at index {i} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Result<Self, SsrError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.values[(y * self.width + x) as usize]
    }
}

/// Median depth under the mask's foreground; even counts average the two
/// middle values.
pub fn median_depth(mask: &BinaryMask, depth: &DepthMap) -> Result<f64, SsrError> {
    mask.check_shape(depth.width, depth.height)?;
    let mut values: Vec<f64> = mask
        .spans()
        .flat_map(|(s, e)| depth.values[s as usize..e as usize].iter().copied())
        .collect();
    if values.is_empty() {
        return Err(SsrError::EmptyRegion);
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> DepthMap {
        DepthMap::new(values.len() as u32, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn odd_even_single() {
        let all = |n: u32| BinaryMask::full(n, 1).unwrap();
        assert_eq!(median_depth(&all(3), &line(&[0.9, 0.2, 0.5])).unwrap(), 0.5);
        let m = median_depth(&all(4), &line(&[0.8, 0.2, 0.6, 0.4])).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert_eq!(median_depth(&all(1), &line(&[0.73])).unwrap(), 0.73);
    }

    #[test]
    fn only_foreground_counts() {
        let m = BinaryMask::from_bits(4, 1, &[false, true, false, true]).unwrap();
        let d = median_depth(&m, &line(&[0.0, 0.3, 1.0, 0.5])).unwrap();
        assert!((d - 0.4).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let empty = BinaryMask::empty(2, 1).unwrap();
        assert_eq!(median_depth(&empty, &line(&[0.1, 0.2])), Err(SsrError::EmptyRegion));
        let m = BinaryMask::full(3, 1).unwrap();
        assert!(matches!(median_depth(&m, &line(&[0.1, 0.2])), Err(SsrError::Shape(_))));
        assert!(DepthMap::new(1, 1, vec![1.2]).is_err());
        assert!(DepthMap::new(2, 1, vec![0.5]).is_err());
    }
}
