//! Client side of every external model.
//!
//! Backends implement the per-service traits ([`Segmenter`], [`Detector`],
//! [`DepthEstimator`], [`Inpainter`], [`Embedder`], [`ChatBackend`]). The
//! [`Gateway`] wraps them and is the only path by which model output reaches
//! the engine: geometry is bounds-checked, depth range-checked, inpainting
//! checked against the preservation contract, chat replies validated against
//! a named schema and embeddings renormalized.

mod chat;
pub mod config;
pub mod conformance;
mod embed;
pub mod mock;
pub mod protocol;
pub mod remote;
pub mod schemas;

use std::fmt;
use std::sync::Arc;

use image::RgbImage;

use crate::ssr::{BinaryMask, Detection, DepthMap};

pub use chat::{extract_json, ChatMessage, ChatRequest, ChatResponse, Role};
pub use embed::{EmbedOutput, EmbedPayload, EmbedTag, EmbedVector};
pub use schemas::{Schema, SchemaRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Service {
    Segment,
    Detect,
    Depth,
    Inpaint,
    Embed,
    Chat,
}

impl Service {
    pub const ALL: [Service; 6] = [
        Service::Segment,
        Service::Detect,
        Service::Depth,
        Service::Inpaint,
        Service::Embed,
        Service::Chat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Service::Segment => "segment",
            Service::Detect => "detect",
            Service::Depth => "depth",
            Service::Inpaint => "inpaint",
            Service::Embed => "embed",
            Service::Chat => "chat",
        }
    }

    pub fn path(self) -> &'static str {
        match self {
            Service::Segment => "/v1/segment",
            Service::Detect => "/v1/detect",
            Service::Depth => "/v1/depth",
            Service::Inpaint => "/v1/inpaint",
            Service::Embed => "/v1/embed",
            Service::Chat => "/v1/chat",
        }
    }
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("{service} backend failed: {message}")]
    Backend { service: Service, message: String },
    #[error("{service} backend violated the protocol: {detail}")]
    ProtocolViolation { service: Service, detail: String },
    #[error("inpainting changed pixel ({x}, {y}) outside the mask by {delta} on channel {channel}")]
    EditLeakage {
        x: u32,
        y: u32,
        channel: usize,
        delta: u8,
    },
    #[error("LLM output for schema `{schema}` is malformed: {detail}")]
    MalformedLlmOutput { schema: String, detail: String },
    #[error("schema `{0}` is not registered")]
    UnknownSchema(String),
    #[error("{service} request is invalid: {detail}")]
    InvalidRequest { service: Service, detail: String },
    #[error("no {0} backend configured")]
    NotConfigured(Service),
}

impl GatewayError {
    pub fn backend(service: Service, message: impl Into<String>) -> Self {
        GatewayError::Backend {
            service,
            message: message.into(),
        }
    }

    pub fn protocol(service: Service, detail: impl Into<String>) -> Self {
        GatewayError::ProtocolViolation {
            service,
            detail: detail.into(),
        }
    }

    /// Service that produced the error, if it is tied to one.
    pub fn service(&self) -> Option<Service> {
        match self {
            GatewayError::Backend { service, .. }
            | GatewayError::ProtocolViolation { service, .. }
            | GatewayError::InvalidRequest { service, .. } => Some(*service),
            GatewayError::EditLeakage { .. } => Some(Service::Inpaint),
            GatewayError::MalformedLlmOutput { .. } | GatewayError::UnknownSchema(_) => {
                Some(Service::Chat)
            }
            GatewayError::NotConfigured(s) => Some(*s),
        }
    }
}

pub trait Segmenter: Send + Sync {
    /// `threshold` is the confidence cut-off for proposed segments; `None`
    /// lets the backend use its default.
    fn segment(&self, image: &RgbImage, threshold: Option<f64>)
        -> Result<Vec<BinaryMask>, GatewayError>;
}

pub trait Detector: Send + Sync {
    fn detect(
        &self,
        image: &RgbImage,
        vocab_hint: Option<&[String]>,
    ) -> Result<Vec<Detection>, GatewayError>;
}

pub trait DepthEstimator: Send + Sync {
    fn estimate_depth(&self, image: &RgbImage) -> Result<DepthMap, GatewayError>;
}

pub trait Inpainter: Send + Sync {
    fn inpaint(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: &str,
    ) -> Result<RgbImage, GatewayError>;
}

pub trait Embedder: Send + Sync {
    fn embed(&self, payload: &EmbedPayload<'_>, tag: EmbedTag) -> Result<EmbedOutput, GatewayError>;
}

pub trait ChatBackend: Send + Sync {
    /// Returns the raw reply text.
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError>;
}

/// How strictly pixels outside an inpainting mask must match the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preservation {
    Strict,
    /// Per-channel absolute difference allowed, in 8-bit levels.
    Lenient { tolerance: u8 },
}

impl Default for Preservation {
    fn default() -> Self {
        Preservation::Lenient { tolerance: 2 }
    }
}

#[derive(Clone, Default)]
pub struct Gateway {
    segmenter: Option<Arc<dyn Segmenter>>,
    detector: Option<Arc<dyn Detector>>,
    depth: Option<Arc<dyn DepthEstimator>>,
    inpainter: Option<Arc<dyn Inpainter>>,
    embedder: Option<Arc<dyn Embedder>>,
    chat: Option<Arc<dyn ChatBackend>>,
    schemas: SchemaRegistry,
    preservation: Preservation,
    repair_template: Option<String>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("segmenter", &self.segmenter.is_some())
            .field("detector", &self.detector.is_some())
            .field("depth", &self.depth.is_some())
            .field("inpainter", &self.inpainter.is_some())
            .field("embedder", &self.embedder.is_some())
            .field("chat", &self.chat.is_some())
            .field("preservation", &self.preservation)
            .finish()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self {
            schemas: SchemaRegistry::standard(),
            ..Self::default()
        }
    }

    pub fn with_segmenter(mut self, b: Arc<dyn Segmenter>) -> Self {
        self.segmenter = Some(b);
        self
    }

    pub fn with_detector(mut self, b: Arc<dyn Detector>) -> Self {
        self.detector = Some(b);
        self
    }

    pub fn with_depth(mut self, b: Arc<dyn DepthEstimator>) -> Self {
        self.depth = Some(b);
        self
    }

    pub fn with_inpainter(mut self, b: Arc<dyn Inpainter>) -> Self {
        self.inpainter = Some(b);
        self
    }

    pub fn with_embedder(mut self, b: Arc<dyn Embedder>) -> Self {
        self.embedder = Some(b);
        self
    }

    pub fn with_chat(mut self, b: Arc<dyn ChatBackend>) -> Self {
        self.chat = Some(b);
        self
    }

    pub fn with_preservation(mut self, p: Preservation) -> Self {
        self.preservation = p;
        self
    }

    pub fn with_schemas(mut self, schemas: SchemaRegistry) -> Self {
        self.schemas = schemas;
        self
    }

    /// Overrides the repair prompt sent after a malformed chat reply.
    /// Placeholders: `{{schema}}`, `{{error}}`.
    pub fn with_repair_template(mut self, template: impl Into<String>) -> Self {
        self.repair_template = Some(template.into());
        self
    }

    pub fn preservation(&self) -> Preservation {
        self.preservation
    }

    pub fn schemas(&self) -> &SchemaRegistry {
        &self.schemas
    }

    pub fn has(&self, service: Service) -> bool {
        match service {
            Service::Segment => self.segmenter.is_some(),
            Service::Detect => self.detector.is_some(),
            Service::Depth => self.depth.is_some(),
            Service::Inpaint => self.inpainter.is_some(),
            Service::Embed => self.embedder.is_some(),
            Service::Chat => self.chat.is_some(),
        }
    }

    pub fn segment(
        &self,
        image: &RgbImage,
        threshold: Option<f64>,
    ) -> Result<Vec<BinaryMask>, GatewayError> {
        let backend = self
            .segmenter
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Segment))?;
        let masks = backend.segment(image, threshold)?;
        for (i, m) in masks.iter().enumerate() {
            m.check_shape(image.width(), image.height())
                .map_err(|e| GatewayError::protocol(Service::Segment, format!("mask {i}: {e}")))?;
        }
        Ok(masks)
    }

    pub fn detect(
        &self,
        image: &RgbImage,
        vocab_hint: Option<&[String]>,
    ) -> Result<Vec<Detection>, GatewayError> {
        let backend = self
            .detector
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Detect))?;
        let detections = backend.detect(image, vocab_hint)?;
        for (i, d) in detections.iter().enumerate() {
            d.validate(image.width(), image.height()).map_err(|e| {
                GatewayError::protocol(Service::Detect, format!("detection {i}: {e}"))
            })?;
        }
        Ok(detections)
    }

    pub fn estimate_depth(&self, image: &RgbImage) -> Result<DepthMap, GatewayError> {
        let backend = self
            .depth
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Depth))?;
        let depth = backend.estimate_depth(image)?;
        if depth.width() != image.width() || depth.height() != image.height() {
            return Err(GatewayError::protocol(
                Service::Depth,
                format!(
                    "depth map is {}x{}, image is {}x{}",
                    depth.width(),
                    depth.height(),
                    image.width(),
                    image.height()
                ),
            ));
        }
        Ok(depth)
    }

    /// Inpaints `mask` and enforces the preservation contract on every pixel
    /// outside it.
    pub fn inpaint(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: &str,
    ) -> Result<RgbImage, GatewayError> {
        let backend = self
            .inpainter
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Inpaint))?;
        mask.check_shape(image.width(), image.height())
            .map_err(|e| GatewayError::InvalidRequest {
                service: Service::Inpaint,
                detail: e.to_string(),
            })?;
        let out = backend.inpaint(image, mask, prompt)?;
        if out.dimensions() != image.dimensions() {
            return Err(GatewayError::protocol(
                Service::Inpaint,
                format!("returned {:?}, expected {:?}", out.dimensions(), image.dimensions()),
            ));
        }
        check_preservation(image, &out, mask, self.preservation)?;
        Ok(out)
    }

    pub fn embed(
        &self,
        payload: &EmbedPayload<'_>,
        tag: EmbedTag,
    ) -> Result<EmbedVector, GatewayError> {
        let backend = self
            .embedder
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Embed))?;
        embed::check_payload(payload, tag)?;
        let out = backend.embed(payload, tag)?;
        embed::normalize(out, tag)
    }

    /// Sends a schema-constrained chat request. A reply that fails the schema
    /// gets exactly one repair attempt before [`GatewayError::MalformedLlmOutput`].
    pub fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let backend = self
            .chat
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Service::Chat))?;
        let schema = self
            .schemas
            .get(&request.schema)
            .ok_or_else(|| GatewayError::UnknownSchema(request.schema.clone()))?;

        let raw = backend.complete(request)?;
        let first_error = match schema.check(&raw) {
            Ok(payload) => {
                return Ok(ChatResponse {
                    raw,
                    payload,
                    attempts: 1,
                })
            }
            Err(e) => e,
        };

        let template = self
            .repair_template
            .as_deref()
            .unwrap_or(chat::DEFAULT_REPAIR_TEMPLATE);
        let repair = template
            .replace("{{schema}}", &request.schema)
            .replace("{{error}}", &first_error);
        let mut retry = request.clone();
        retry.messages.push(ChatMessage::text(Role::Assistant, raw));
        retry.messages.push(ChatMessage::text(Role::User, repair));

        let raw = backend.complete(&retry)?;
        match schema.check(&raw) {
            Ok(payload) => Ok(ChatResponse {
                raw,
                payload,
                attempts: 2,
            }),
            Err(detail) => Err(GatewayError::MalformedLlmOutput {
                schema: request.schema.clone(),
                detail,
            }),
        }
    }
}

fn check_preservation(
    input: &RgbImage,
    output: &RgbImage,
    mask: &BinaryMask,
    mode: Preservation,
) -> Result<(), GatewayError> {
    let tolerance = match mode {
        Preservation::Strict => 0,
        Preservation::Lenient { tolerance } => tolerance,
    };
    let outside = mask.complement();
    for (x, y) in outside.pixels() {
        let a = input.get_pixel(x, y);
        let b = output.get_pixel(x, y);
        for c in 0..3 {
            let delta = a[c].abs_diff(b[c]);
            if delta > tolerance {
                return Err(GatewayError::EditLeakage {
                    x,
                    y,
                    channel: c,
                    delta,
                });
            }
        }
    }
    Ok(())
}
