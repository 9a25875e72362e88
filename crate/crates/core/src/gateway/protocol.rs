//! Wire types for the `/v1/*` JSON protocol.
//!
//! Every request is an HTTP POST with a JSON body carrying a `request_id`
//! (also sent as the `Idempotency-Key` header). Images travel as base64 PNG,
//! masks as run-length JSON (`{"width", "height", "runs"}`), boxes as
//! inclusive `[x_min, y_min, x_max, y_max]`. Responses may echo
//! `request_id`; when they do it must match. Non-2xx responses carry
//! `{"error": "..."}`.
//!
//! The same structs serve both directions so test servers and adapters can
//! reuse them.

use serde::{Deserialize, Serialize};

use super::EmbedTag;
use crate::ssr::{BinaryMask, Detection, DepthMap};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRequest {
    pub request_id: String,
    pub image_png: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub masks: Vec<BinaryMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectRequest {
    pub request_id: String,
    pub image_png: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_hint: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRequest {
    pub request_id: String,
    pub image_png: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    /// Row-major values, each in `[0, 1]`, smaller is nearer.
    pub depth: DepthMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintRequest {
    pub request_id: String,
    pub image_png: String,
    pub mask: BinaryMask,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub image_png: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub request_id: String,
    pub model: EmbedTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_png: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Second image for `lpips-distance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_png: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: super::Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images_png: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatWireRequest {
    pub request_id: String,
    /// Registered schema name.
    pub schema: String,
    /// JSON Schema document for constrained decoding.
    pub response_schema: serde_json::Value,
    pub messages: Vec<WireMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatWireResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub text: String,
}

/// `GET /v1/info` manifest served by model adapters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterManifest {
    pub service: String,
    pub model: String,
    pub device: String,
    pub protocol_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
