//! The refinement chain: decompose a query into subtasks, then for each one
//! assess whether the scene suffices, refine it semantically or spatially
//! until it does, and resolve the subtask into an explicit edit step.

mod chain;
pub mod dsl;
pub mod prompts;
mod trace;

use crate::gateway::GatewayError;
use crate::ssr::{BinaryMask, ObjectId, SsrError};

pub use crate::gateway::schemas::NeedKind;
pub use chain::{render_plan, scene_summary, ChainConfig, Reasoner, DEFAULT_CAP, THRESHOLD_SCHEDULE};
pub use dsl::{interpret_spatial, SpatialProgram};
pub use prompts::{PromptSet, PROMPT_VERSION};
pub use trace::{Trace, TraceEvent, TraceRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReasoningError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Ssr(#[from] SsrError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("spatial program statement {index}: {message}")]
    Dsl { index: usize, message: String },
    #[error("cannot resolve edit: {0}")]
    Resolution(String),
    #[error("subtask {subtask} still lacks information after {cap} refinement rounds")]
    IterationLimit {
        subtask: usize,
        cap: usize,
        trace: Box<Trace>,
    },
    #[error("prompt error: {0}")]
    Prompt(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPlan {
    pub source_query: String,
    /// Ordered and nonempty.
    pub subtasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoNeed {
    pub kind: NeedKind,
    /// Empty exactly when `kind` is `None`.
    pub detail: String,
}

impl InfoNeed {
    pub fn none() -> Self {
        Self {
            kind: NeedKind::None,
            detail: String::new(),
        }
    }
}

pub fn need_name(kind: NeedKind) -> &'static str {
    match kind {
        NeedKind::None => "none",
        NeedKind::Semantic => "semantic",
        NeedKind::Spatial => "spatial",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Add,
    Remove,
    Replace,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Remove => "remove",
            OpKind::Replace => "replace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditStep {
    /// Empty only for `Add`.
    pub target_ids: Vec<ObjectId>,
    /// Union of the target masks, or the rasterized placement box for `Add`.
    pub mask: BinaryMask,
    pub explicit_instruction: String,
    pub op_kind: OpKind,
    /// New content for `Replace` and `Add`.
    pub target_description: Option<String>,
    /// Text handed to the inpainter: the background-completion template for
    /// `Remove`, the target description otherwise.
    pub inpaint_prompt: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditPlan {
    pub task: TaskPlan,
    pub steps: Vec<EditStep>,
    pub trace: Trace,
}
