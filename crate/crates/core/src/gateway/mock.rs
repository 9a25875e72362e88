//! Deterministic in-process backends for tests, dry runs and the `mock`
//! endpoint setting.

use std::collections::VecDeque;
use std::sync::Mutex;

use image::{Rgb, RgbImage};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::remote::{Transport, TransportError};
use super::{
    ChatBackend, ChatRequest, DepthEstimator, Detector, EmbedOutput, EmbedPayload, EmbedTag,
    Embedder, GatewayError, Inpainter, Segmenter, Service,
};
use crate::ssr::{BinaryMask, Detection, DepthMap};

/// 4-connected components of uniformly colored pixels other than
/// `background`, ordered by their first pixel in row-major order.
pub fn color_components(image: &RgbImage, background: Rgb<u8>) -> Vec<(Rgb<u8>, BinaryMask)> {
    let (w, h) = image.dimensions();
    let mut seen = vec![false; (w as usize) * (h as usize)];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            let color = *image.get_pixel(x, y);
            if seen[idx] || color == background {
                continue;
            }
            let mut bits = vec![false; seen.len()];
            let mut queue = VecDeque::from([(x, y)]);
            seen[idx] = true;
            while let Some((cx, cy)) = queue.pop_front() {
                bits[(cy * w + cx) as usize] = true;
                let neighbours = [
                    (cx.wrapping_sub(1), cy),
                    (cx + 1, cy),
                    (cx, cy.wrapping_sub(1)),
                    (cx, cy + 1),
                ];
                for (nx, ny) in neighbours {
                    if nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if !seen[n] && *image.get_pixel(nx, ny) == color {
                        seen[n] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            out.push((color, BinaryMask::from_bits(w, h, &bits).expect("shape matches")));
        }
    }
    out
}

fn response_at<T: Clone>(responses: &[T], call: usize) -> Option<T> {
    responses.get(call.min(responses.len().saturating_sub(1))).cloned()
}

/// Returns canned masks. Call `n` gets `responses[n]`; the last entry
/// repeats.
pub struct FixtureSegmenter {
    responses: Vec<Vec<BinaryMask>>,
    calls: Mutex<Vec<Option<f64>>>,
}

impl FixtureSegmenter {
    pub fn new(masks: Vec<BinaryMask>) -> Self {
        Self::sequence(vec![masks])
    }

    pub fn sequence(responses: Vec<Vec<BinaryMask>>) -> Self {
        Self {
            responses,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Thresholds passed so far.
    pub fn calls(&self) -> Vec<Option<f64>> {
        self.calls.lock().unwrap().clone()
    }
}

impl Segmenter for FixtureSegmenter {
    fn segment(&self, _: &RgbImage, threshold: Option<f64>) -> Result<Vec<BinaryMask>, GatewayError> {
        let mut calls = self.calls.lock().unwrap();
        let n = calls.len();
        calls.push(threshold);
        Ok(response_at(&self.responses, n).unwrap_or_default())
    }
}

pub struct FixtureDetector {
    responses: Vec<Vec<Detection>>,
    hints: Mutex<Vec<Option<Vec<String>>>>,
}

impl FixtureDetector {
    pub fn new(detections: Vec<Detection>) -> Self {
        Self::sequence(vec![detections])
    }

    pub fn sequence(responses: Vec<Vec<Detection>>) -> Self {
        Self {
            responses,
            hints: Mutex::new(Vec::new()),
        }
    }

    pub fn hints(&self) -> Vec<Option<Vec<String>>> {
        self.hints.lock().unwrap().clone()
    }
}

impl Detector for FixtureDetector {
    fn detect(&self, _: &RgbImage, vocab_hint: Option<&[String]>) -> Result<Vec<Detection>, GatewayError> {
        let mut hints = self.hints.lock().unwrap();
        let n = hints.len();
        hints.push(vocab_hint.map(<[String]>::to_vec));
        Ok(response_at(&self.responses, n).unwrap_or_default())
    }
}

pub struct FixtureDepth(pub DepthMap);

impl DepthEstimator for FixtureDepth {
    fn estimate_depth(&self, _: &RgbImage) -> Result<DepthMap, GatewayError> {
        Ok(self.0.clone())
    }
}

pub struct ConstantDepth(pub f64);

impl DepthEstimator for ConstantDepth {
    fn estimate_depth(&self, image: &RgbImage) -> Result<DepthMap, GatewayError> {
        DepthMap::constant(image.width(), image.height(), self.0)
            .map_err(|e| GatewayError::backend(Service::Depth, e.to_string()))
    }
}

/// One color known to the palette backends.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteEntry {
    pub color: [u8; 3],
    pub label: String,
    #[serde(default = "one")]
    pub score: f64,
    #[serde(default = "half")]
    pub depth: f64,
    /// Segmentation confidence; the component is only proposed when the
    /// requested threshold is at or below it.
    #[serde(default = "one")]
    pub confidence: f64,
    /// Only detected when the vocabulary hint names the label.
    #[serde(default)]
    pub hint_only: bool,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl PaletteEntry {
    pub fn new(color: [u8; 3], label: impl Into<String>, depth: f64) -> Self {
        Self {
            color,
            label: label.into(),
            score: 1.0,
            depth,
            confidence: 1.0,
            hint_only: false,
        }
    }

    pub fn confidence(mut self, c: f64) -> Self {
        self.confidence = c;
        self
    }

    pub fn hint_only(mut self) -> Self {
        self.hint_only = true;
        self
    }
}

/// Threshold the palette segmenter applies when the caller passes none.
pub const DEFAULT_THRESHOLD: f64 = 0.88;

/// Segmenter, detector and depth estimator driven by flat-colored synthetic
/// images: every uniformly colored component on a known background is an
/// object.
#[derive(Debug, Clone)]
pub struct Palette {
    pub background: Rgb<u8>,
    pub background_depth: f64,
    pub entries: Vec<PaletteEntry>,
}

impl Palette {
    pub fn new(background: [u8; 3], entries: Vec<PaletteEntry>) -> Self {
        Self {
            background: Rgb(background),
            background_depth: 1.0,
            entries,
        }
    }

    fn entry(&self, color: Rgb<u8>) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.color == color.0)
    }
}

impl Segmenter for Palette {
    fn segment(&self, image: &RgbImage, threshold: Option<f64>) -> Result<Vec<BinaryMask>, GatewayError> {
        let t = threshold.unwrap_or(DEFAULT_THRESHOLD);
        Ok(color_components(image, self.background)
            .into_iter()
            .filter(|(c, _)| self.entry(*c).map_or(1.0, |e| e.confidence) >= t)
            .map(|(_, m)| m)
            .collect())
    }
}

impl Detector for Palette {
    fn detect(&self, image: &RgbImage, vocab_hint: Option<&[String]>) -> Result<Vec<Detection>, GatewayError> {
        let hinted = |label: &str| {
            vocab_hint.is_some_and(|h| h.iter().any(|w| w.trim().eq_ignore_ascii_case(label)))
        };
        Ok(color_components(image, self.background)
            .into_iter()
            .filter_map(|(c, m)| {
                let e = self.entry(c)?;
                if e.hint_only && !hinted(&e.label) {
                    return None;
                }
                Some(Detection::new(m.bbox()?, e.label.clone(), e.score))
            })
            .collect())
    }
}

impl DepthEstimator for Palette {
    fn estimate_depth(&self, image: &RgbImage) -> Result<DepthMap, GatewayError> {
        let values = image
            .pixels()
            .map(|p| self.entry(*p).map_or(self.background_depth, |e| e.depth))
            .collect();
        DepthMap::new(image.width(), image.height(), values)
            .map_err(|e| GatewayError::backend(Service::Depth, e.to_string()))
    }
}

pub struct IdentityInpainter;

impl Inpainter for IdentityInpainter {
    fn inpaint(&self, image: &RgbImage, _: &BinaryMask, _: &str) -> Result<RgbImage, GatewayError> {
        Ok(image.clone())
    }
}

/// Paints the masked pixels one solid color.
pub struct FillInpainter {
    color: Rgb<u8>,
}

impl FillInpainter {
    pub fn new(color: [u8; 3]) -> Self {
        Self { color: Rgb(color) }
    }
}

impl Inpainter for FillInpainter {
    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask, _: &str) -> Result<RgbImage, GatewayError> {
        let mut out = image.clone();
        for (x, y) in mask.pixels() {
            out.put_pixel(x, y, self.color);
        }
        Ok(out)
    }
}

/// Replies from a fixed queue and records every request.
pub struct ScriptedChat {
    replies: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl ScriptedChat {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.requests.lock().unwrap().push(request.clone());
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| GatewayError::backend(Service::Chat, "script exhausted"))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRule {
    pub schema: String,
    /// Substrings that must all occur in the request text.
    #[serde(default)]
    pub contains: Vec<String>,
    pub reply: Value,
}

/// Stateless chat mock: the first rule whose schema matches and whose
/// substrings all occur in the request text supplies the reply. Being pure,
/// it gives identical results under any worker count.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(transparent)]
pub struct RuleChat {
    rules: Vec<ChatRule>,
}

impl RuleChat {
    pub fn new(rules: Vec<ChatRule>) -> Self {
        Self { rules }
    }

    pub fn rule(mut self, schema: &str, contains: &[&str], reply: Value) -> Self {
        self.rules.push(ChatRule {
            schema: schema.into(),
            contains: contains.iter().map(|s| s.to_string()).collect(),
            reply,
        });
        self
    }
}

impl ChatBackend for RuleChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let text = request.text();
        self.rules
            .iter()
            .find(|r| r.schema == request.schema && r.contains.iter().all(|c| text.contains(c.as_str())))
            .map(|r| match &r.reply {
                Value::String(s) => s.clone(),
                v => v.to_string(),
            })
            .ok_or_else(|| {
                GatewayError::backend(
                    Service::Chat,
                    format!("no rule matches schema `{}`", request.schema),
                )
            })
    }
}

/// Returns the same vector and distance for every call.
pub struct FixedEmbedder {
    pub vector: Vec<f64>,
    pub distance: f64,
}

impl Embedder for FixedEmbedder {
    fn embed(&self, payload: &EmbedPayload<'_>, _: EmbedTag) -> Result<EmbedOutput, GatewayError> {
        Ok(match payload {
            EmbedPayload::ImagePair(..) => EmbedOutput::Distance(self.distance),
            _ => EmbedOutput::Vector(self.vector.clone()),
        })
    }
}

/// Content-derived embeddings. Images map to a coarse color histogram,
/// text to seeded hash features; the distance model returns the mean
/// absolute pixel difference. Equal inputs give equal outputs.
pub struct HashEmbedder {
    pub seed: u64,
}

const HIST_BINS: usize = 4;

impl HashEmbedder {
    fn image_vector(&self, image: &RgbImage) -> Vec<f64> {
        let mut hist = vec![1e-3; HIST_BINS * HIST_BINS * HIST_BINS];
        for p in image.pixels() {
            let b = |v: u8| v as usize * HIST_BINS / 256;
            hist[(b(p[0]) * HIST_BINS + b(p[1])) * HIST_BINS + b(p[2])] += 1.0;
        }
        hist
    }

    fn text_vector(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; HIST_BINS * HIST_BINS * HIST_BINS];
        for word in text.split_whitespace() {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(word.to_lowercase().as_bytes());
            let digest = h.finalize();
            let n = out.len();
            out[digest[0] as usize % n] += 1.0;
        }
        out[0] += 1e-3;
        out
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, payload: &EmbedPayload<'_>, _: EmbedTag) -> Result<EmbedOutput, GatewayError> {
        Ok(match payload {
            EmbedPayload::Image(img) => EmbedOutput::Vector(self.image_vector(img)),
            EmbedPayload::Text(t) => EmbedOutput::Vector(self.text_vector(t)),
            EmbedPayload::ImagePair(a, b) => {
                if a.dimensions() != b.dimensions() {
                    return Err(GatewayError::InvalidRequest {
                        service: Service::Embed,
                        detail: "image sizes differ".into(),
                    });
                }
                let n = (a.width() as f64 * a.height() as f64 * 3.0).max(1.0);
                let sum: f64 = a
                    .as_raw()
                    .iter()
                    .zip(b.as_raw())
                    .map(|(x, y)| x.abs_diff(*y) as f64 / 255.0)
                    .sum();
                EmbedOutput::Distance(sum / n)
            }
        })
    }
}

type Responder = dyn Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync;

/// In-memory transport: records every posted body and answers through a
/// closure. Lets tests inspect exactly what crosses the wire.
pub struct FixtureTransport {
    respond: Box<Responder>,
    sent: Mutex<Vec<(String, Value)>>,
}

impl FixtureTransport {
    pub fn new<F>(respond: F) -> Self
    where
        F: Fn(&str, &Value) -> Result<Value, TransportError> + Send + Sync + 'static,
    {
        Self {
            respond: Box::new(respond),
            sent: Mutex::new(Vec::new()),
        }
    }

    /// `(path, body)` pairs in send order.
    pub fn requests(&self) -> Vec<(String, Value)> {
        self.sent.lock().unwrap().clone()
    }
}

impl Transport for FixtureTransport {
    fn post(&self, path: &str, body: &Value, _: &str) -> Result<Value, TransportError> {
        self.sent.lock().unwrap().push((path.to_string(), body.clone()));
        (self.respond)(path, body)
    }

    fn get(&self, path: &str) -> Result<Value, TransportError> {
        (self.respond)(path, &Value::Null)
    }
}
