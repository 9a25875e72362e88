use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{GatewayError, Service};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbedTag {
    #[serde(rename = "clip-image")]
    ClipImage,
    #[serde(rename = "clip-text")]
    ClipText,
    #[serde(rename = "dino")]
    Dino,
    #[serde(rename = "lpips-distance")]
    LpipsDistance,
}

impl EmbedTag {
    pub fn name(self) -> &'static str {
        match self {
            EmbedTag::ClipImage => "clip-image",
            EmbedTag::ClipText => "clip-text",
            EmbedTag::Dino => "dino",
            EmbedTag::LpipsDistance => "lpips-distance",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EmbedPayload<'a> {
    Image(&'a RgbImage),
    Text(&'a str),
    /// Reference and candidate for distance models.
    ImagePair(&'a RgbImage, &'a RgbImage),
}

/// Unvalidated backend output.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedOutput {
    Vector(Vec<f64>),
    Distance(f64),
}

/// Validated embedding: vectors are unit-normalized, distances finite and
/// non-negative.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedVector {
    Vector { tag: EmbedTag, values: Vec<f64> },
    Distance { tag: EmbedTag, value: f64 },
}

impl EmbedVector {
    pub fn tag(&self) -> EmbedTag {
        match self {
            EmbedVector::Vector { tag, .. } | EmbedVector::Distance { tag, .. } => *tag,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            EmbedVector::Vector { values, .. } => Some(values),
            EmbedVector::Distance { .. } => None,
        }
    }

    pub fn distance(&self) -> Option<f64> {
        match self {
            EmbedVector::Distance { value, .. } => Some(*value),
            EmbedVector::Vector { .. } => None,
        }
    }
}

pub(crate) fn check_payload(payload: &EmbedPayload<'_>, tag: EmbedTag) -> Result<(), GatewayError> {
    let ok = matches!(
        (tag, payload),
        (EmbedTag::ClipImage | EmbedTag::Dino, EmbedPayload::Image(_))
            | (EmbedTag::ClipText, EmbedPayload::Text(_))
            | (EmbedTag::LpipsDistance, EmbedPayload::ImagePair(_, _))
    );
    if ok {
        Ok(())
    } else {
        Err(GatewayError::InvalidRequest {
            service: Service::Embed,
            detail: format!("payload kind does not match model tag {}", tag.name()),
        })
    }
}

pub(crate) fn normalize(out: EmbedOutput, tag: EmbedTag) -> Result<EmbedVector, GatewayError> {
    let violation = |d: String| GatewayError::protocol(Service::Embed, d);
    match (tag, out) {
        (EmbedTag::LpipsDistance, EmbedOutput::Distance(value)) => {
            if !value.is_finite() || value < 0.0 {
                return Err(violation(format!("distance {value} is not a finite non-negative number")));
            }
            Ok(EmbedVector::Distance { tag, value })
        }
        (EmbedTag::LpipsDistance, EmbedOutput::Vector(_)) => {
            Err(violation("lpips-distance must return a scalar distance".into()))
        }
        (_, EmbedOutput::Distance(_)) => {
            Err(violation(format!("{} must return a vector", tag.name())))
        }
        (_, EmbedOutput::Vector(values)) => {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(violation("embedding is empty or has non-finite entries".into()));
            }
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(violation("embedding has zero norm".into()));
            }
            Ok(EmbedVector::Vector {
                tag,
                values: values.into_iter().map(|v| v / norm).collect(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renormalizes_to_unit_length() {
        let v = normalize(EmbedOutput::Vector(vec![2.0, 0.0, 0.0]), EmbedTag::Dino).unwrap();
        assert_eq!(v.values().unwrap(), &[1.0, 0.0, 0.0]);
        let v = normalize(EmbedOutput::Vector(vec![1.2, -1.6]), EmbedTag::ClipImage).unwrap();
        let norm: f64 = v.values().unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_outputs() {
        assert!(normalize(EmbedOutput::Vector(vec![0.0, 0.0]), EmbedTag::Dino).is_err());
        assert!(normalize(EmbedOutput::Vector(vec![f64::NAN]), EmbedTag::Dino).is_err());
        assert!(normalize(EmbedOutput::Distance(-0.1), EmbedTag::LpipsDistance).is_err());
        assert!(normalize(EmbedOutput::Distance(0.2), EmbedTag::ClipText).is_err());
        assert!(normalize(EmbedOutput::Vector(vec![1.0]), EmbedTag::LpipsDistance).is_err());
    }

    #[test]
    fn payload_must_match_tag() {
        let img = RgbImage::new(1, 1);
        assert!(check_payload(&EmbedPayload::Text("x"), EmbedTag::ClipText).is_ok());
        assert!(check_payload(&EmbedPayload::Image(&img), EmbedTag::ClipText).is_err());
        assert!(check_payload(&EmbedPayload::Image(&img), EmbedTag::LpipsDistance).is_err());
    }
}
