//! Backend configuration: where each service lives and how to talk to it.
//!
//! Each endpoint is either an `http(s)://` base URL or one of the in-process
//! mocks: `mock` (palette backends for segment/detect/depth, fill for
//! inpaint, hash embeddings, rule chat) or `mock:identity` (inpaint only).
//! Rule-chat mocks fall back to a one-subtask decomposition, a "none"
//! assessment and a neutral judge when no configured rule matches.
//! A service with no endpoint stays unconfigured.
//!
//! ```toml
//! timeout_secs = 30
//! retry_count = 2
//!
//! [endpoints]
//! segment = "http://127.0.0.1:8101"
//! chat = "mock"
//!
//! [preservation]
//! mode = "lenient"
//! tolerance = 2
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::mock::{ChatRule, FillInpainter, HashEmbedder, IdentityInpainter, Palette, PaletteEntry, RuleChat};
use super::remote::{HttpTransport, RemoteClient};
use super::{Gateway, Preservation, Service};

pub const ENV_PREFIX: &str = "REASONEDIT_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {detail}")]
    Invalid { key: String, detail: String },
}

impl ConfigError {
    fn invalid(key: &str, detail: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endpoints {
    pub segment: Option<String>,
    pub detect: Option<String>,
    pub depth: Option<String>,
    pub inpaint: Option<String>,
    pub embed: Option<String>,
    pub chat: Option<String>,
}

impl Endpoints {
    pub fn get(&self, service: Service) -> Option<&str> {
        match service {
            Service::Segment => self.segment.as_deref(),
            Service::Detect => self.detect.as_deref(),
            Service::Depth => self.depth.as_deref(),
            Service::Inpaint => self.inpaint.as_deref(),
            Service::Embed => self.embed.as_deref(),
            Service::Chat => self.chat.as_deref(),
        }
    }

    pub fn set(&mut self, service: Service, value: String) {
        let slot = match service {
            Service::Segment => &mut self.segment,
            Service::Detect => &mut self.detect,
            Service::Depth => &mut self.depth,
            Service::Inpaint => &mut self.inpaint,
            Service::Embed => &mut self.embed,
            Service::Chat => &mut self.chat,
        };
        *slot = Some(value);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreservationMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreservationConfig {
    pub mode: PreservationMode,
    #[serde(default = "default_tolerance")]
    pub tolerance: u8,
}

fn default_tolerance() -> u8 {
    2
}

impl Default for PreservationConfig {
    fn default() -> Self {
        Self {
            mode: PreservationMode::Lenient,
            tolerance: default_tolerance(),
        }
    }
}

/// Settings for the in-process mocks.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockConfig {
    #[serde(default)]
    pub background: [u8; 3],
    #[serde(default = "default_background_depth")]
    pub background_depth: f64,
    #[serde(default)]
    pub palette: Vec<PaletteEntry>,
    #[serde(default = "default_fill")]
    pub fill_color: [u8; 3],
    #[serde(default)]
    pub chat_rules: Vec<ChatRule>,
    /// JSON file holding further rules, appended after the inline ones.
    /// Relative paths resolve against the config file's directory.
    pub chat_rules_file: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_background_depth() -> f64 {
    1.0
}

fn default_fill() -> [u8; 3] {
    [255, 0, 255]
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            background: [0, 0, 0],
            background_depth: default_background_depth(),
            palette: Vec::new(),
            fill_color: default_fill(),
            chat_rules: Vec::new(),
            chat_rules_file: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retry_count: u32,
    pub auth_token: Option<String>,
    /// Limit on one base64-encoded image in a request body.
    #[serde(default = "default_max_image_bytes")]
    pub max_image_bytes: usize,
    #[serde(default)]
    pub preservation: PreservationConfig,
    #[serde(default)]
    pub mock: MockConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

fn default_max_image_bytes() -> usize {
    32 * 1024 * 1024
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoints: Endpoints::default(),
            timeout_secs: default_timeout(),
            retry_count: default_retries(),
            auth_token: None,
            max_image_bytes: default_max_image_bytes(),
            preservation: PreservationConfig::default(),
            mock: MockConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl BackendConfig {
    /// Every service on the in-process mocks.
    pub fn all_mock() -> Self {
        let mut c = Self::default();
        for s in Service::ALL {
            c.endpoints.set(s, "mock".into());
        }
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let c: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            ConfigError::Parse(format!("{} (at `{}`)", e.inner(), e.path()))
        })?;
        c.validate()?;
        Ok(c)
    }

    /// Loads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    /// Applies `REASONEDIT_<SERVICE>_URL` and `REASONEDIT_AUTH_TOKEN`.
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<(), ConfigError> {
        for s in Service::ALL {
            if let Some(v) = lookup(&format!("{ENV_PREFIX}{}_URL", s.name().to_uppercase())) {
                self.endpoints.set(s, v);
            }
        }
        if let Some(t) = lookup(&format!("{ENV_PREFIX}AUTH_TOKEN")) {
            self.auth_token = Some(t);
        }
        self.validate()
    }

    pub fn apply_process_env(&mut self) -> Result<(), ConfigError> {
        self.apply_env(|k| std::env::var(k).ok())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConfigError::invalid("timeout_secs", "must be a positive number of seconds"));
        }
        if self.retry_count > 5 {
            return Err(ConfigError::invalid("retry_count", "must be at most 5"));
        }
        if self.max_image_bytes == 0 {
            return Err(ConfigError::invalid("max_image_bytes", "must be positive"));
        }
        for s in Service::ALL {
            let Some(v) = self.endpoints.get(s) else { continue };
            let ok = v == "mock"
                || (v == "mock:identity" && s == Service::Inpaint)
                || v.starts_with("http://")
                || v.starts_with("https://");
            if !ok {
                return Err(ConfigError::invalid(
                    &format!("endpoints.{}", s.name()),
                    format!("`{v}` is neither an http(s) URL nor a known mock"),
                ));
            }
        }
        let d = self.mock.background_depth;
        if !(0.0..=1.0).contains(&d) {
            return Err(ConfigError::invalid("mock.background_depth", "must lie in [0, 1]"));
        }
        for (i, e) in self.mock.palette.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.depth) {
                return Err(ConfigError::invalid(&format!("mock.palette.{i}.depth"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn preservation_mode(&self) -> Preservation {
        match self.preservation.mode {
            PreservationMode::Strict => Preservation::Strict,
            PreservationMode::Lenient => Preservation::Lenient {
                tolerance: self.preservation.tolerance,
            },
        }
    }

    fn palette(&self) -> Palette {
        Palette {
            background: image::Rgb(self.mock.background),
            background_depth: self.mock.background_depth,
            entries: self.mock.palette.clone(),
        }
    }

    fn rule_chat(&self) -> Result<RuleChat, ConfigError> {
        let mut rules = self.mock.chat_rules.clone();
        if let Some(file) = &self.mock.chat_rules_file {
            let path = self.base_dir.join(file);
            let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            let extra: Vec<ChatRule> = serde_json::from_str(&text)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
            rules.extend(extra);
        }
        // Fallbacks after the configured rules: a one-subtask decomposition
        // (which keeps the query verbatim), a sufficient scene, and a neutral
        // judge. Resolution has no sensible default.
        let fallback = RuleChat::new(rules)
            .rule("decompose", &[], json!({"subtasks": ["edit"]}))
            .rule("assess", &[], json!({"need": "none"}))
            .rule("idcs_describe", &[], json!({"description": "no visible difference"}))
            .rule("idcs_score", &[], json!({"score": 1}));
        Ok(fallback)
    }

    fn remote(&self, service: Service, url: &str) -> Arc<RemoteClient> {
        let transport = HttpTransport::new(
            url,
            Duration::from_secs_f64(self.timeout_secs),
            self.auth_token.clone(),
        );
        Arc::new(
            RemoteClient::new(service, Arc::new(transport))
                .with_retries(self.retry_count)
                .with_max_image_bytes(self.max_image_bytes),
        )
    }

    /// Builds a gateway wired to the configured backends.
    pub fn connect(&self) -> Result<Gateway, ConfigError> {
        self.validate()?;
        let mut gw = Gateway::new().with_preservation(self.preservation_mode());
        let palette = Arc::new(self.palette());
        for s in Service::ALL {
            let Some(endpoint) = self.endpoints.get(s) else { continue };
            if endpoint.starts_with("http") {
                let c = self.remote(s, endpoint);
                gw = match s {
                    Service::Segment => gw.with_segmenter(c),
                    Service::Detect => gw.with_detector(c),
                    Service::Depth => gw.with_depth(c),
                    Service::Inpaint => gw.with_inpainter(c),
                    Service::Embed => gw.with_embedder(c),
                    Service::Chat => gw.with_chat(c),
                };
                continue;
            }
            gw = match (s, endpoint) {
                (Service::Segment, _) => gw.with_segmenter(palette.clone()),
                (Service::Detect, _) => gw.with_detector(palette.clone()),
                (Service::Depth, _) => gw.with_depth(palette.clone()),
                (Service::Inpaint, "mock:identity") => gw.with_inpainter(Arc::new(IdentityInpainter)),
                (Service::Inpaint, _) => gw.with_inpainter(Arc::new(FillInpainter::new(self.mock.fill_color))),
                (Service::Embed, _) => gw.with_embedder(Arc::new(HashEmbedder { seed: self.mock.seed })),
                (Service::Chat, _) => gw.with_chat(Arc::new(self.rule_chat()?)),
            };
        }
        Ok(gw)
    }
}
