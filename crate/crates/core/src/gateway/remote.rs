//! HTTP clients for the `/v1/*` protocol.

use std::sync::Arc;
use std::time::Duration;

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::protocol::*;
use super::{
    ChatBackend, ChatRequest, DepthEstimator, Detector, EmbedOutput, EmbedPayload, EmbedTag,
    Embedder, GatewayError, Inpainter, SchemaRegistry, Segmenter, Service,
};
use crate::raster;
use crate::ssr::{BinaryMask, Detection, DepthMap};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    /// Connection-level failure; safe to retry with the same idempotency key.
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("HTTP {code}: {body}")]
    Status { code: u16, body: String },
    #[error("response is not JSON: {0}")]
    InvalidBody(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Unreachable(_) => true,
            TransportError::Status { code, .. } => *code == 429 || *code >= 500,
            TransportError::InvalidBody(_) => false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn post(&self, path: &str, body: &Value, idempotency_key: &str) -> Result<Value, TransportError>;
    fn get(&self, path: &str) -> Result<Value, TransportError>;
}

/// Blocking HTTP transport. One agent holds a bounded connection pool and
/// may be shared across jobs.
pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    auth_token: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>, timeout: Duration, auth_token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_idle_connections(16)
            .build()
            .into();
        Self {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            auth_token,
        }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Value, TransportError> {
        let mut resp = resp.map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let code = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if !(200..300).contains(&code) {
            let body = serde_json::from_str::<ErrorBody>(&text)
                .map(|e| e.error)
                .unwrap_or(text);
            return Err(TransportError::Status { code, body });
        }
        serde_json::from_str(&text).map_err(|e| TransportError::InvalidBody(e.to_string()))
    }
}

impl Transport for HttpTransport {
    fn post(&self, path: &str, body: &Value, idempotency_key: &str) -> Result<Value, TransportError> {
        let mut req = self
            .agent
            .post(&format!("{}{}", self.base_url, path))
            .header("Idempotency-Key", idempotency_key);
        if let Some(token) = &self.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        Self::finish(req.send_json(body))
    }

    fn get(&self, path: &str) -> Result<Value, TransportError> {
        let mut req = self.agent.get(&format!("{}{}", self.base_url, path));
        if let Some(token) = &self.auth_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        Self::finish(req.call())
    }
}

/// Protocol client for one service endpoint.
pub struct RemoteClient {
    service: Service,
    transport: Arc<dyn Transport>,
    retry_count: u32,
    max_image_bytes: usize,
    schemas: SchemaRegistry,
}

impl RemoteClient {
    pub fn new(service: Service, transport: Arc<dyn Transport>) -> Self {
        Self {
            service,
            transport,
            retry_count: 2,
            max_image_bytes: 16 * 1024 * 1024,
            schemas: SchemaRegistry::standard(),
        }
    }

    pub fn with_retries(mut self, retry_count: u32) -> Self {
        self.retry_count = retry_count;
        self
    }

    pub fn with_max_image_bytes(mut self, limit: usize) -> Self {
        self.max_image_bytes = limit;
        self
    }

    pub fn service(&self) -> Service {
        self.service
    }

    /// Fetches and checks the adapter manifest.
    pub fn info(&self) -> Result<AdapterManifest, GatewayError> {
        let value = self
            .transport
            .get("/v1/info")
            .map_err(|e| GatewayError::backend(self.service, e.to_string()))?;
        let manifest: AdapterManifest = serde_json::from_value(value)
            .map_err(|e| GatewayError::protocol(self.service, format!("bad manifest: {e}")))?;
        if manifest.protocol_version != PROTOCOL_VERSION {
            return Err(GatewayError::protocol(
                self.service,
                format!(
                    "adapter speaks protocol {}, expected {PROTOCOL_VERSION}",
                    manifest.protocol_version
                ),
            ));
        }
        Ok(manifest)
    }

    fn encode_image(&self, image: &RgbImage) -> Result<String, GatewayError> {
        let b64 = raster::png_base64(image);
        if b64.len() > self.max_image_bytes {
            return Err(GatewayError::InvalidRequest {
                service: self.service,
                detail: format!(
                    "encoded image is {} bytes, limit is {}",
                    b64.len(),
                    self.max_image_bytes
                ),
            });
        }
        Ok(b64)
    }

    /// Posts `body` to `service`'s path, retrying transient failures with a
    /// stable idempotency key, and decodes the reply as `R`.
    fn call<R: DeserializeOwned>(&self, service: Service, mut body: Value) -> Result<R, GatewayError> {
        let key = idempotency_key(service, &body);
        body["request_id"] = Value::String(key.clone());
        let mut attempt = 0;
        let value = loop {
            match self.transport.post(service.path(), &body, &key) {
                Ok(v) => break v,
                Err(e) if e.retryable() && attempt < self.retry_count => attempt += 1,
                Err(TransportError::Status { code, body }) if (400..500).contains(&code) => {
                    return Err(GatewayError::InvalidRequest {
                        service,
                        detail: format!("HTTP {code}: {body}"),
                    })
                }
                Err(e) => return Err(GatewayError::backend(service, e.to_string())),
            }
        };
        if let Some(echo) = value.get("request_id").and_then(Value::as_str) {
            if echo != key {
                return Err(GatewayError::protocol(
                    service,
                    format!("echoed request_id {echo} does not match {key}"),
                ));
            }
        }
        serde_json::from_value(value).map_err(|e| GatewayError::protocol(service, e.to_string()))
    }
}

/// Stable key over the service path and request body.
pub fn idempotency_key(service: Service, body: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(service.path().as_bytes());
    hasher.update([0]);
    let mut body = body.clone();
    if let Some(map) = body.as_object_mut() {
        map.remove("request_id");
    }
    hasher.update(body.to_string().as_bytes());
    hasher.finalize()[..16]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("wire types serialize")
}

impl Segmenter for RemoteClient {
    fn segment(&self, image: &RgbImage, threshold: Option<f64>) -> Result<Vec<BinaryMask>, GatewayError> {
        let req = SegmentRequest {
            request_id: String::new(),
            image_png: self.encode_image(image)?,
            threshold,
        };
        let resp: SegmentResponse = self.call(Service::Segment, to_value(&req))?;
        Ok(resp.masks)
    }
}

impl Detector for RemoteClient {
    fn detect(&self, image: &RgbImage, vocab_hint: Option<&[String]>) -> Result<Vec<Detection>, GatewayError> {
        let req = DetectRequest {
            request_id: String::new(),
            image_png: self.encode_image(image)?,
            vocab_hint: vocab_hint.map(<[String]>::to_vec),
        };
        let resp: DetectResponse = self.call(Service::Detect, to_value(&req))?;
        Ok(resp.detections)
    }
}

impl DepthEstimator for RemoteClient {
    fn estimate_depth(&self, image: &RgbImage) -> Result<DepthMap, GatewayError> {
        let req = DepthRequest {
            request_id: String::new(),
            image_png: self.encode_image(image)?,
        };
        let resp: DepthResponse = self.call(Service::Depth, to_value(&req))?;
        Ok(resp.depth)
    }
}

impl Inpainter for RemoteClient {
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask, prompt: &str) -> Result<RgbImage, GatewayError> {
        let req = InpaintRequest {
            request_id: String::new(),
            image_png: self.encode_image(image)?,
            mask: mask.clone(),
            prompt: prompt.to_string(),
        };
        let resp: InpaintResponse = self.call(Service::Inpaint, to_value(&req))?;
        raster::png_from_base64(&resp.image_png)
            .map_err(|e| GatewayError::protocol(Service::Inpaint, e.to_string()))
    }
}

impl Embedder for RemoteClient {
    fn embed(&self, payload: &EmbedPayload<'_>, tag: EmbedTag) -> Result<EmbedOutput, GatewayError> {
        let mut req = EmbedRequest {
            request_id: String::new(),
            model: tag,
            image_png: None,
            text: None,
            reference_png: None,
        };
        match payload {
            EmbedPayload::Image(img) => req.image_png = Some(self.encode_image(img)?),
            EmbedPayload::Text(t) => req.text = Some((*t).to_string()),
            EmbedPayload::ImagePair(a, b) => {
                req.reference_png = Some(self.encode_image(a)?);
                req.image_png = Some(self.encode_image(b)?);
            }
        }
        let resp: EmbedResponse = self.call(Service::Embed, to_value(&req))?;
        match (resp.vector, resp.distance) {
            (Some(v), None) => Ok(EmbedOutput::Vector(v)),
            (None, Some(d)) => Ok(EmbedOutput::Distance(d)),
            _ => Err(GatewayError::protocol(
                Service::Embed,
                "response must carry exactly one of `vector` or `distance`",
            )),
        }
    }
}

impl ChatBackend for RemoteClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let response_schema = self
            .schemas
            .get(&request.schema)
            .and_then(|s| serde_json::from_str(s.document).ok())
            .unwrap_or(Value::Null);
        let messages = request
            .messages
            .iter()
            .map(|m| {
                Ok(WireMessage {
                    role: m.role,
                    content: m.content.clone(),
                    images_png: m
                        .images
                        .iter()
                        .map(|img| self.encode_image(img))
                        .collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, GatewayError>>()?;
        let req = ChatWireRequest {
            request_id: String::new(),
            schema: request.schema.clone(),
            response_schema,
            messages,
        };
        let resp: ChatWireResponse = self.call(Service::Chat, to_value(&req))?;
        Ok(resp.text)
    }
}
