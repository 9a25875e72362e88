use image::RgbImage;
use serde::{Deserialize, Serialize};

pub(crate) const DEFAULT_REPAIR_TEMPLATE: &str = include_str!("../../prompts/v1/repair.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    /// Images attached to this message, sent as base64 PNG on the wire.
    pub images: Vec<RgbImage>,
}

impl ChatMessage {
    pub fn text(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            images: Vec::new(),
        }
    }

    pub fn with_images(role: Role, content: impl Into<String>, images: Vec<RgbImage>) -> Self {
        Self {
            role,
            content: content.into(),
            images,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    /// Name of the registered schema the reply must satisfy.
    pub schema: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn new(schema: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            schema: schema.into(),
            messages,
        }
    }

    /// Single user message without images.
    pub fn user(schema: impl Into<String>, content: impl Into<String>) -> Self {
        Self::new(schema, vec![ChatMessage::text(Role::User, content)])
    }

    pub fn image_count(&self) -> usize {
        self.messages.iter().map(|m| m.images.len()).sum()
    }

    /// Concatenated message text, used by rule-based mocks.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub raw: String,
    /// Schema-validated JSON payload.
    pub payload: serde_json::Value,
    /// 1, or 2 when the repair retry was needed.
    pub attempts: u32,
}

/// Pulls a JSON object out of a reply, tolerating code fences and prose
/// around a single top-level object.
pub fn extract_json(raw: &str) -> Result<serde_json::Value, String> {
    let trimmed = raw.trim();
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .map(str::trim)
        .unwrap_or(trimmed);
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(unfenced) {
        return Ok(v);
    }
    match (unfenced.find('{'), unfenced.rfind('}')) {
        (Some(start), Some(end)) if start < end => {
            serde_json::from_str(&unfenced[start..=end]).map_err(|e| format!("invalid JSON: {e}"))
        }
        _ => Err("reply contains no JSON object".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_plain_fenced_and_embedded() {
        assert_eq!(extract_json(r#"{"a":1}"#).unwrap()["a"], 1);
        assert_eq!(extract_json("```json\n{\"a\":2}\n```").unwrap()["a"], 2);
        assert_eq!(extract_json("Answer: {\"a\":3} done").unwrap()["a"], 3);
        assert!(extract_json("no json here").is_err());
        assert!(extract_json("{broken").is_err());
    }
}
