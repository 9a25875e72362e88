//! Structured scene representation: mask algebra, label assignment,
//! same-label merging, depth aggregation and (de)serialization.

mod build;
mod depth;
mod export;
mod iou;
mod json;
mod labels;
mod mask;
mod merge;
mod scene;

pub use build::build_ssr;
pub use depth::{median_depth, DepthMap};
pub use export::{export_mask_pngs, mask_from_png, mask_to_png};
pub use iou::{region_iou, Region};
pub use json::{ssr_parse, ssr_serialize, SSR_VERSION};
pub(crate) use json::attr_to_canon;
pub use labels::{assign_labels, Detection, DEFAULT_TAU};
pub(crate) use labels::best_label;
pub use mask::{BinaryMask, BoundingBox, Span};
pub use merge::merge_same_label;
pub use scene::{AttrValue, ObjectId, SceneObject, SceneRep, DEPTH_CONVENTION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SsrError {
    #[error("malformed mask: {0}")]
    MalformedMask(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("region is empty")]
    EmptyRegion,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("SSR parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
}
