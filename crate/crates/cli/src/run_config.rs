//! Run configuration: TOML file, then `REASONEDIT_*` environment variables,
//! then command-line flags, later sources winning.
//!
//! ```toml
//! backend = "backends.toml"     # or an inline [backends] table
//! cap = 5
//! tau = 0.5
//! dilation = 0
//! metric_region = "outside-mask"
//! output_dir = "reasonedit-out"
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use reasonedit_core::eval::{ClipVariant, RegionMode};
use reasonedit_core::gateway::config::{BackendConfig, ENV_PREFIX};
use reasonedit_core::reasoning::DEFAULT_CAP;
use reasonedit_core::ssr::DEFAULT_TAU;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MAX_CAP: usize = 100;
pub const MAX_DILATION: u32 = 256;
pub const MAX_WORKERS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Backend config file, relative to this file.
    pub backend: Option<PathBuf>,
    /// Inline backend config; exclusive with `backend`.
    #[serde(skip_serializing)]
    pub backends: Option<BackendConfig>,
    pub cap: usize,
    pub tau: f64,
    pub dilation: u32,
    pub metric_region: RegionMode,
    pub output_dir: PathBuf,
    /// Seed for the in-process mock backends.
    pub seed: u64,
    pub rebuild_between_steps: bool,
    pub workers: usize,
    pub clip_variant: Option<ClipVariant>,
    pub judge: String,
    /// Directory of prompt templates replacing the built-in set.
    pub prompts_dir: Option<PathBuf>,
    /// Report timestamp; `SOURCE_DATE_EPOCH` or the current time otherwise.
    pub timestamp: Option<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    source_text: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: None,
            backends: None,
            cap: DEFAULT_CAP,
            tau: DEFAULT_TAU,
            dilation: 0,
            metric_region: RegionMode::OutsideMask,
            output_dir: PathBuf::from("reasonedit-out"),
            seed: 0,
            rebuild_between_steps: true,
            workers: 4,
            clip_variant: None,
            judge: "default".into(),
            prompts_dir: None,
            timestamp: None,
            base_dir: PathBuf::from("."),
            source_text: String::new(),
        }
    }
}

/// Values given on the command line.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Run configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Backend configuration file (TOML or JSON).
    #[arg(long)]
    pub backend: Option<PathBuf>,
    /// Maximum refinement rounds per subtask.
    #[arg(long)]
    pub cap: Option<usize>,
    /// IoU threshold for matching masks.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Square dilation radius applied to edit masks.
    #[arg(long)]
    pub dilation: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn parse_env<T: std::str::FromStr>(
    lookup: &dyn Fn(&str) -> Option<String>,
    name: &str,
) -> Result<Option<T>, CliError> {
    let key = format!("{ENV_PREFIX}{name}");
    match lookup(&key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config(format!("invalid value for `{key}`: `{v}`"))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let mut c: RunConfig =
            toml::from_str(text).map_err(|e| CliError::config(format!("run config: {e}")))?;
        c.source_text = text.to_string();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::from_toml_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    /// Loads the file named by `--config` (if any), then applies the
    /// environment and the flags.
    pub fn resolve(flags: &Overrides, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let mut c = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(p) = lookup(&format!("{ENV_PREFIX}BACKEND_CONFIG")) {
            c.backend = Some(PathBuf::from(p));
            c.backends = None;
        }
        if let Some(v) = parse_env(lookup, "CAP")? {
            c.cap = v;
        }
        if let Some(v) = parse_env(lookup, "TAU")? {
            c.tau = v;
        }
        if let Some(v) = parse_env(lookup, "DILATION")? {
            c.dilation = v;
        }
        if let Some(v) = parse_env(lookup, "SEED")? {
            c.seed = v;
        }
        if let Some(v) = parse_env(lookup, "WORKERS")? {
            c.workers = v;
        }
        if let Some(v) = lookup(&format!("{ENV_PREFIX}OUTPUT_DIR")) {
            c.output_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup(&format!("{ENV_PREFIX}METRIC_REGION")) {
            c.metric_region = parse_region(&v)?;
        }

        if let Some(p) = &flags.backend {
            // Flag paths are relative to the working directory, not the file.
            c.backend = Some(std::path::absolute(p).unwrap_or_else(|_| p.clone()));
            c.backends = None;
        }
        if let Some(v) = flags.cap {
            c.cap = v;
        }
        if let Some(v) = flags.tau {
            c.tau = v;
        }
        if let Some(v) = flags.dilation {
            c.dilation = v;
        }
        if let Some(v) = flags.seed {
            c.seed = v;
        }
        if let Some(v) = &flags.output_dir {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, detail: &str| CliError::config(format!("invalid value for `{key}`: {detail}"));
        if self.cap == 0 || self.cap > MAX_CAP {
            return Err(bad("cap", &format!("must lie in 1..={MAX_CAP}")));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(bad("tau", "must lie in (0, 1]"));
        }
        if self.dilation > MAX_DILATION {
            return Err(bad("dilation", &format!("must be at most {MAX_DILATION}")));
        }
        if self.workers == 0 || self.workers > MAX_WORKERS {
            return Err(bad("workers", &format!("must lie in 1..={MAX_WORKERS}")));
        }
        if self.backend.is_some() && self.backends.is_some() {
            return Err(bad("backends", "give either `backend` or `[backends]`, not both"));
        }
        Ok(())
    }

    /// Backend settings: the referenced or inline config, or every service
    /// on the mocks when neither is given. Endpoint environment variables
    /// and the seed are applied last.
    pub fn backend_config(&self, lookup: &dyn Fn(&str) -> Option<String>) -> Result<BackendConfig, CliError> {
        let mut b = match (&self.backend, &self.backends) {
            (Some(p), _) => BackendConfig::load(&self.base_dir.join(p))?,
            (None, Some(b)) => {
                b.validate()?;
                BackendConfig {
                    base_dir: self.base_dir.clone(),
                    ..b.clone()
                }
            }
            (None, None) => BackendConfig::all_mock(),
        };
        b.apply_env(lookup)?;
        b.mock.seed = self.seed;
        Ok(b)
    }

    /// sha256 over the resolved settings and every config file read.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_string(self).unwrap_or_default());
        h.update([0]);
        h.update(&self.source_text);
        if let Some(p) = &self.backend {
            h.update([0]);
            h.update(std::fs::read(self.base_dir.join(p)).unwrap_or_default());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// RFC 3339 timestamp for reports.
    pub fn report_timestamp(&self, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String, CliError> {
        if let Some(t) = &self.timestamp {
            return Ok(t.clone());
        }
        let when = match lookup("SOURCE_DATE_EPOCH") {
            Some(v) => {
                let secs: u64 = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("invalid SOURCE_DATE_EPOCH `{v}`")))?;
                std::time::UNIX_EPOCH + std::time::Duration::from_secs(secs)
            }
            None => std::time::SystemTime::now(),
        };
        Ok(humantime::format_rfc3339_seconds(when).to_string())
    }
}

pub fn parse_region(s: &str) -> Result<RegionMode, CliError> {
    match s.trim() {
        "full" => Ok(RegionMode::Full),
        "outside-mask" => Ok(RegionMode::OutsideMask),
        other => Err(CliError::config(format!(
            "invalid metric region `{other}` (expected full or outside-mask)"
        ))),
    }
}

pub fn parse_clip_variant(s: &str) -> Result<ClipVariant, CliError> {
    match s.trim() {
        "image-text" => Ok(ClipVariant::ImageText),
        "image-image" => Ok(ClipVariant::ImageImage),
        other => Err(CliError::config(format!(
            "invalid clip variant `{other}` (expected image-text or image-image)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let m: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| m.get(k).cloned()
    }

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn precedence() {
        let (_d, p) = write("cap = 3\ntau = 0.4\ndilation = 1\n");
        let flags = Overrides {
            config: Some(p),
            cap: Some(7),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(&flags, &env(&[("REASONEDIT_CAP", "4"), ("REASONEDIT_TAU", "0.6")])).unwrap();
        assert_eq!((c.cap, c.tau, c.dilation), (7, 0.6, 1));
    }

    #[test]
    fn unknown_key_is_named() {
        let (_d, p) = write("cap = 3\ncolour = 1\n");
        let e = RunConfig::load(&p).unwrap_err();
        assert_eq!(e.code, 1);
        assert!(e.message.contains("colour"), "{}", e.message);
    }

    #[test]
    fn ranges() {
        for text in ["cap = 0", "tau = 0.0", "tau = 1.5", "workers = 0", "dilation = 1000"] {
            let mut c = RunConfig::from_toml_str(text).unwrap();
            c.base_dir = PathBuf::new();
            assert!(c.validate().is_err(), "{text}");
        }
        let e = RunConfig::resolve(&Overrides::default(), &env(&[("REASONEDIT_CAP", "many")])).unwrap_err();
        assert!(e.message.contains("REASONEDIT_CAP"));
    }

    #[test]
    fn inline_backends() {
        let (_d, p) = write("seed = 9\n[backends.endpoints]\nsegment = \"mock\"\n");
        let c = RunConfig::resolve(&Overrides { config: Some(p), ..Overrides::default() }, &env(&[])).unwrap();
        let b = c.backend_config(&env(&[])).unwrap();
        assert_eq!(b.endpoints.segment.as_deref(), Some("mock"));
        assert_eq!(b.endpoints.chat, None);
        assert_eq!(b.mock.seed, 9);
        let all = RunConfig::default().backend_config(&env(&[])).unwrap();
        assert_eq!(all.endpoints.chat.as_deref(), Some("mock"));
    }

    #[test]
    fn timestamps_and_hash() {
        let c = RunConfig::default();
        assert_eq!(
            c.report_timestamp(&env(&[("SOURCE_DATE_EPOCH", "0")])).unwrap(),
            "1970-01-01T00:00:00Z"
        );
        assert_eq!(c.config_hash(), RunConfig::default().config_hash());
        let other = RunConfig { cap: 2, ..RunConfig::default() };
        assert_ne!(c.config_hash(), other.config_hash());
        assert_eq!(c.config_hash().len(), 64);
    }
}
