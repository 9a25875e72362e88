use image::RgbImage;

use super::{assign_labels, median_depth, merge_same_label, SceneRep, SsrError};
use crate::canonical::quantize6;
use crate::gateway::{Gateway, GatewayError, Service};

/// Builds the initial scene: segment, label by box IoU, merge touching
/// same-label objects, then attach the median depth of each object.
///
/// Empty proposals are dropped. The result is at revision 0.
pub fn build_ssr(image: &RgbImage, gw: &Gateway, tau: f64) -> Result<SceneRep, GatewayError> {
    let masks: Vec<_> = gw
        .segment(image, None)?
        .into_iter()
        .filter(|m| !m.is_empty())
        .collect();
    let detections = if masks.is_empty() { Vec::new() } else { gw.detect(image, None)? };
    let violation = |s: Service| move |e: SsrError| GatewayError::protocol(s, e.to_string());
    let labeled = assign_labels(&masks, &detections, tau).map_err(violation(Service::Detect))?;
    let mut objects = merge_same_label(&labeled).map_err(violation(Service::Segment))?;
    if !objects.is_empty() {
        let depth = gw.estimate_depth(image)?;
        for o in &mut objects {
            let d = median_depth(&o.mask, &depth).map_err(violation(Service::Depth))?;
            o.depth = Some(quantize6(d));
        }
    }
    SceneRep::new(image.width(), image.height(), objects).map_err(violation(Service::Segment))
}
