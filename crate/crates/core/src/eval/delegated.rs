//! Metrics computed by learned models behind the embedding service.

use image::RgbImage;

use super::EvalError;
use crate::gateway::{EmbedPayload, EmbedTag, Gateway, GatewayError, Service};

fn lift(metric: &str, e: GatewayError) -> EvalError {
    match e {
        GatewayError::NotConfigured(Service::Embed) => EvalError::MetricUnavailable(metric.into()),
        // A backend that does not serve the tag is treated the same way.
        GatewayError::InvalidRequest { service: Service::Embed, .. } => {
            EvalError::MetricUnavailable(metric.into())
        }
        e => EvalError::Gateway(e),
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::Shape(format!("embedding lengths {} and {}", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EvalError::Shape("zero embedding".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn vector(
    gw: &Gateway,
    metric: &str,
    payload: EmbedPayload<'_>,
    tag: EmbedTag,
) -> Result<Vec<f64>, EvalError> {
    let v = gw.embed(&payload, tag).map_err(|e| lift(metric, e))?;
    v.values()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| EvalError::Gateway(GatewayError::protocol(Service::Embed, "expected a vector")))
}

/// Perceptual distance between a reference and a candidate.
pub fn lpips(gw: &Gateway, reference: &RgbImage, candidate: &RgbImage) -> Result<f64, EvalError> {
    let v = gw
        .embed(&EmbedPayload::ImagePair(reference, candidate), EmbedTag::LpipsDistance)
        .map_err(|e| lift("lpips", e))?;
    v.distance()
        .ok_or_else(|| EvalError::Gateway(GatewayError::protocol(Service::Embed, "expected a distance")))
}

/// Cosine similarity of two images under an image embedding (`clip-image`
/// or `dino`).
pub fn delegated_similarity(
    gw: &Gateway,
    tag: EmbedTag,
    a: &RgbImage,
    b: &RgbImage,
) -> Result<f64, EvalError> {
    let va = vector(gw, tag.name(), EmbedPayload::Image(a), tag)?;
    let vb = vector(gw, tag.name(), EmbedPayload::Image(b), tag)?;
    cosine(&va, &vb)
}

/// Cosine similarity between an image and a text under CLIP.
pub fn clip_image_text(gw: &Gateway, image: &RgbImage, text: &str) -> Result<f64, EvalError> {
    let vi = vector(gw, "clip", EmbedPayload::Image(image), EmbedTag::ClipImage)?;
    let vt = vector(gw, "clip", EmbedPayload::Text(text), EmbedTag::ClipText)?;
    cosine(&vi, &vt)
}
