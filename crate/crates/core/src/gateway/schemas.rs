//! Named output schemas for chat replies.
//!
//! Each schema pairs a JSON Schema document (shown to the model and sent on
//! the wire so servers can constrain decoding) with a typed reply struct whose
//! deserialization plus [`Reply::check`] is the authoritative validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::chat::extract_json;

pub trait Reply: DeserializeOwned {
    const SCHEMA: &'static str;

    fn check(&self) -> Result<(), String> {
        Ok(())
    }

    fn from_payload(payload: &Value) -> Result<Self, String> {
        let reply: Self = serde_json::from_value(payload.clone()).map_err(|e| e.to_string())?;
        reply.check()?;
        Ok(reply)
    }
}

#[derive(Clone, Copy)]
pub struct Schema {
    pub name: &'static str,
    /// JSON Schema text describing the expected reply.
    pub document: &'static str,
    validator: fn(&Value) -> Result<(), String>,
}

impl fmt::Debug for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Schema").field("name", &self.name).finish()
    }
}

impl Schema {
    pub fn of<T: Reply>(document: &'static str) -> Self {
        Self {
            name: T::SCHEMA,
            document,
            validator: |v| T::from_payload(v).map(|_| ()),
        }
    }

    pub fn validate(&self, payload: &Value) -> Result<(), String> {
        (self.validator)(payload)
    }

    /// Extracts and validates the JSON payload of a raw reply.
    pub fn check(&self, raw: &str) -> Result<Value, String> {
        let payload = extract_json(raw)?;
        self.validate(&payload)?;
        Ok(payload)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SchemaRegistry {
    schemas: BTreeMap<&'static str, Schema>,
}

impl SchemaRegistry {
    /// Every schema used by the refinement chain and the IDCS judge.
    pub fn standard() -> Self {
        let mut r = Self::default();
        r.register(Schema::of::<DecomposeReply>(include_str!("../../schemas/decompose.json")));
        r.register(Schema::of::<AssessReply>(include_str!("../../schemas/assess.json")));
        r.register(Schema::of::<SpatialProgramReply>(include_str!(
            "../../schemas/spatial_program.json"
        )));
        r.register(Schema::of::<ResolveReply>(include_str!("../../schemas/resolve.json")));
        r.register(Schema::of::<DescribeReply>(include_str!("../../schemas/idcs_describe.json")));
        r.register(Schema::of::<ScoreReply>(include_str!("../../schemas/idcs_score.json")));
        r
    }

    pub fn register(&mut self, schema: Schema) {
        self.schemas.insert(schema.name, schema);
    }

    pub fn get(&self, name: &str) -> Option<&Schema> {
        self.schemas.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.schemas.keys().copied()
    }
}

fn nonempty(field: &str, s: &str) -> Result<(), String> {
    if s.trim().is_empty() {
        Err(format!("`{field}` must be a nonempty string"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DecomposeReply {
    pub subtasks: Vec<String>,
}

impl Reply for DecomposeReply {
    const SCHEMA: &'static str = "decompose";

    fn check(&self) -> Result<(), String> {
        if self.subtasks.is_empty() {
            return Err("`subtasks` must contain at least one entry".into());
        }
        self.subtasks.iter().try_for_each(|s| nonempty("subtasks[]", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeedKind {
    None,
    Semantic,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AssessReply {
    pub need: NeedKind,
    #[serde(default)]
    pub detail: String,
}

impl Reply for AssessReply {
    const SCHEMA: &'static str = "assess";

    fn check(&self) -> Result<(), String> {
        match self.need {
            NeedKind::None => Ok(()),
            _ => nonempty("detail", &self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StatementDoc {
    /// `name` for a scene attribute or `<id>.name` for an object attribute.
    pub output: String,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SpatialProgramReply {
    pub statements: Vec<StatementDoc>,
}

/// Upper bound on statements per spatial program.
pub const MAX_STATEMENTS: usize = 32;

impl Reply for SpatialProgramReply {
    const SCHEMA: &'static str = "spatial_program";

    fn check(&self) -> Result<(), String> {
        if self.statements.is_empty() || self.statements.len() > MAX_STATEMENTS {
            return Err(format!(
                "`statements` must hold 1..={MAX_STATEMENTS} entries, got {}",
                self.statements.len()
            ));
        }
        for s in &self.statements {
            nonempty("statements[].output", &s.output)?;
            nonempty("statements[].expr", &s.expr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpDoc {
    Add,
    Remove,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResolveReply {
    #[serde(default)]
    pub target_ids: Vec<u32>,
    pub instruction: String,
    pub op: OpDoc,
    /// Description of the new content for `replace` and `add`.
    #[serde(default)]
    pub replacement: Option<String>,
    /// `[x_min, y_min, x_max, y_max]` placement box for `add`.
    #[serde(default)]
    pub placement: Option<[u32; 4]>,
}

impl Reply for ResolveReply {
    const SCHEMA: &'static str = "resolve";

    fn check(&self) -> Result<(), String> {
        nonempty("instruction", &self.instruction)?;
        match self.op {
            OpDoc::Add if self.placement.is_none() => {
                Err("`placement` is required when `op` is add".into())
            }
            OpDoc::Remove | OpDoc::Replace if self.target_ids.is_empty() => {
                Err("`target_ids` must be nonempty for remove and replace".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DescribeReply {
    pub description: String,
}

impl Reply for DescribeReply {
    const SCHEMA: &'static str = "idcs_describe";

    fn check(&self) -> Result<(), String> {
        nonempty("description", &self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScoreReply {
    pub score: u8,
}

impl Reply for ScoreReply {
    const SCHEMA: &'static str = "idcs_score";

    fn check(&self) -> Result<(), String> {
        if (1..=5).contains(&self.score) {
            Ok(())
        } else {
            Err(format!("`score` must be in 1..=5, got {}", self.score))
        }
    }
}
