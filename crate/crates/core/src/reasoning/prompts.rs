//! Prompt templates.
//!
//! Templates are plain text files with `{{name}}` placeholders. The built-in
//! set is compiled in from `prompts/v1/`; a directory with files of the same
//! names (`decompose.txt`, `assess.txt`, ...) overrides any of them.

use std::collections::BTreeMap;
use std::path::Path;

use super::ReasoningError;

pub const PROMPT_VERSION: &str = "v1";

const BUILTIN: [(&str, &str); 8] = [
    ("decompose", include_str!("../../prompts/v1/decompose.txt")),
    ("assess", include_str!("../../prompts/v1/assess.txt")),
    ("spatial_program", include_str!("../../prompts/v1/spatial_program.txt")),
    ("resolve", include_str!("../../prompts/v1/resolve.txt")),
    ("inpaint_remove", include_str!("../../prompts/v1/inpaint_remove.txt")),
    ("idcs_describe", include_str!("../../prompts/v1/idcs_describe.txt")),
    ("idcs_score", include_str!("../../prompts/v1/idcs_score.txt")),
    ("repair", include_str!("../../prompts/v1/repair.txt")),
];

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Built-in templates overridden by any `<name>.txt` found in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, ReasoningError> {
        let mut set = Self::builtin();
        if !dir.is_dir() {
            return Err(ReasoningError::Prompt(format!(
                "prompt directory {} does not exist",
                dir.display()
            )));
        }
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ReasoningError::Prompt(format!("{}: {e}", path.display())))?;
                set.templates.insert(name.to_string(), text);
            }
        }
        Ok(set)
    }

    pub fn template(&self, name: &str) -> Option<&str> {
        self.templates.get(name).map(String::as_str)
    }

    /// Fills every placeholder. Leftover placeholders are an error so a
    /// template edit cannot silently drop context.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, ReasoningError> {
        let template = self
            .template(name)
            .ok_or_else(|| ReasoningError::Prompt(format!("no template named `{name}`")))?;
        let mut out = template.to_string();
        for (key, value) in vars {
            out = out.replace(&format!("{{{{{key}}}}}"), value);
        }
        if let Some(start) = out.find("{{") {
            if let Some(len) = out[start..].find("}}") {
                let placeholder = &out[start..start + len + 2];
                if is_placeholder(placeholder) {
                    return Err(ReasoningError::Prompt(format!(
                        "template `{name}` has unfilled placeholder {placeholder}"
                    )));
                }
            }
        }
        Ok(out)
    }
}

fn is_placeholder(s: &str) -> bool {
    let inner = &s[2..s.len() - 2];
    !inner.is_empty() && inner.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}
