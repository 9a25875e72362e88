use serde::{Deserialize, Serialize};

use super::{region_iou, BinaryMask, BoundingBox, SceneObject, SsrError};

/// Default IoU threshold below which a mask stays unlabeled.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
    pub score: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, label: impl Into<String>, score: f64) -> Self {
        Self {
            bbox,
            label: label.into(),
            score,
        }
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), SsrError> {
        if self.label.trim().is_empty() {
            return Err(SsrError::Shape("detection label is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(SsrError::Shape(format!("detection score {} outside [0, 1]", self.score)));
        }
        if !self.bbox.fits(width, height) {
            return Err(SsrError::Shape(format!(
                "box {:?} exceeds {width}x{height}",
                <[u32; 4]>::from(self.bbox)
            )));
        }
        Ok(())
    }
}

/// Labels each mask with the detection whose box has the highest IoU.
///
/// Ties are broken by higher detection score, then by lower detection index.
/// A mask whose best IoU is zero or below `tau` stays unlabeled. Objects get
/// ids `1..=masks.len()` in input order.
pub fn assign_labels(
    masks: &[BinaryMask],
    detections: &[Detection],
    tau: f64,
) -> Result<Vec<SceneObject>, SsrError> {
    masks
        .iter()
        .enumerate()
        .map(|(i, mask)| {
            let label = best_label(mask, detections, tau)?;
            Ok(SceneObject::new(i as u32 + 1, mask.clone(), label))
        })
        .collect()
}

pub(crate) fn best_label(
    mask: &BinaryMask,
    detections: &[Detection],
    tau: f64,
) -> Result<Option<String>, SsrError> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (j, det) in detections.iter().enumerate() {
        let iou = region_iou(mask, &det.bbox)?;
        let better = match best {
            None => true,
            Some((b_iou, b_score, _)) => iou > b_iou || (iou == b_iou && det.score > b_score),
        };
        if better {
            best = Some((iou, det.score, j));
        }
    }
    Ok(best
        .filter(|&(iou, _, _)| iou > 0.0 && iou >= tau)
        .map(|(_, _, j)| detections[j].label.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: [u32; 4], label: &str, score: f64) -> Detection {
        Detection::new(BoundingBox::try_from(b).unwrap(), label, score)
    }

    fn square(x0: u32, y0: u32, side: u32) -> BinaryMask {
        BinaryMask::from_fn(10, 10, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side)
            .unwrap()
    }

    #[test]
    fn exact_box_gets_label() {
        let objs = assign_labels(&[square(2, 2, 3)], &[det([2, 2, 4, 4], "cat", 0.9)], 0.5).unwrap();
        assert_eq!(objs[0].label.as_deref(), Some("cat"));
        assert_eq!(objs[0].id, 1);
    }

    #[test]
    fn highest_iou_wins() {
        // 5x2 mask at rows 0-1, cols 0-4 (10 px)
        let mask = BinaryMask::from_fn(10, 10, |x, y| x < 5 && y < 2).unwrap();
        // dog box 5x3 over rows 0-2: inter 10, union 15 -> 0.667
        // cat box 1x2 at col 0: inter 2, union 10 -> 0.2
        let dets = [det([0, 0, 0, 1], "cat", 0.99), det([0, 0, 4, 2], "dog", 0.5)];
        let objs = assign_labels(&[mask], &dets, 0.1).unwrap();
        assert_eq!(objs[0].label.as_deref(), Some("dog"));
    }

    #[test]
    fn no_overlap_is_unlabeled() {
        let objs = assign_labels(&[square(0, 0, 2)], &[det([6, 6, 8, 8], "cup", 1.0)], 0.1).unwrap();
        assert_eq!(objs[0].label, None);
        let objs = assign_labels(&[square(0, 0, 2)], &[], 0.0).unwrap();
        assert_eq!(objs[0].label, None);
    }

    #[test]
    fn below_threshold_is_unlabeled() {
        let objs = assign_labels(&[square(0, 0, 2)], &[det([0, 0, 3, 3], "cup", 1.0)], 0.5).unwrap();
        // 4 / 16
        assert_eq!(objs[0].label, None);
    }

    #[test]
    fn ties_prefer_score_then_index() {
        let m = square(0, 0, 2);
        let dets = [
            det([0, 0, 1, 1], "a", 0.5),
            det([0, 0, 1, 1], "b", 0.8),
            det([0, 0, 1, 1], "c", 0.8),
        ];
        let objs = assign_labels(&[m], &dets, 0.5).unwrap();
        assert_eq!(objs[0].label.as_deref(), Some("b"));
    }

    #[test]
    fn detection_validation() {
        assert!(det([0, 0, 3, 3], "x", 0.5).validate(4, 4).is_ok());
        assert!(det([0, 0, 4, 3], "x", 0.5).validate(4, 4).is_err());
        assert!(det([0, 0, 1, 1], " ", 0.5).validate(4, 4).is_err());
        assert!(det([0, 0, 1, 1], "x", 1.5).validate(4, 4).is_err());
    }
}
