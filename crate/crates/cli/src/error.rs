//! Error ids and exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage, configuration, I/O or dataset error |
//! | 2 | iteration limit reached |
//! | 3 | backend failure (unreachable, protocol violation, not configured) |
//! | 4 | reasoning failure (malformed LLM output, resolution, DSL, precondition) |
//! | 5 | inpainting changed pixels outside the mask |

use std::fmt;

use reasonedit_core::eval::EvalError;
use reasonedit_core::exec::ExecError;
use reasonedit_core::gateway::config::ConfigError;
use reasonedit_core::gateway::GatewayError;
use reasonedit_core::pipeline::PipelineError;
use reasonedit_core::reasoning::{ReasoningError, Trace};

#[derive(Debug)]
pub struct CliError {
    pub id: &'static str,
    pub code: u8,
    pub message: String,
    /// Partial trace for failures inside the chain.
    pub trace: Option<Box<Trace>>,
}

impl CliError {
    pub fn new(id: &'static str, code: u8, message: impl Into<String>) -> Self {
        Self {
            id,
            code,
            message: message.into(),
            trace: None,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("E_CONFIG", 1, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("E_IO", 1, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.id, self.message)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        let (id, code) = match &e {
            GatewayError::EditLeakage { .. } => ("E_EDIT_LEAKAGE", 5),
            GatewayError::MalformedLlmOutput { .. } => ("E_MALFORMED_LLM_OUTPUT", 4),
            GatewayError::UnknownSchema(_) => ("E_UNKNOWN_SCHEMA", 4),
            GatewayError::ProtocolViolation { .. } => ("E_PROTOCOL", 3),
            GatewayError::InvalidRequest { .. } => ("E_INVALID_REQUEST", 3),
            GatewayError::NotConfigured(_) => ("E_NOT_CONFIGURED", 3),
            GatewayError::Backend { .. } => ("E_BACKEND", 3),
        };
        CliError::new(id, code, e.to_string())
    }
}

impl From<ReasoningError> for CliError {
    fn from(e: ReasoningError) -> Self {
        let message = e.to_string();
        match e {
            ReasoningError::Gateway(g) => g.into(),
            ReasoningError::IterationLimit { trace, .. } => CliError {
                trace: Some(trace),
                ..CliError::new("E_ITERATION_LIMIT", 2, message)
            },
            ReasoningError::Ssr(_) => CliError::new("E_SSR", 4, message),
            ReasoningError::Precondition(_) => CliError::new("E_PRECONDITION", 4, message),
            ReasoningError::Dsl { .. } => CliError::new("E_DSL", 4, message),
            ReasoningError::Resolution(_) => CliError::new("E_RESOLUTION", 4, message),
            ReasoningError::Prompt(_) => CliError::new("E_PROMPT", 1, message),
        }
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::EmptyPlan => CliError::new("E_EMPTY_PLAN", 4, e.to_string()),
            ExecError::Step { step, source, .. } => {
                let mut c = CliError::from(source);
                c.message = format!("step {step}: {}", c.message);
                c
            }
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Reasoning(r) => r.into(),
            PipelineError::Exec(x) => x.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let message = e.to_string();
        match e {
            EvalError::Gateway(g) => g.into(),
            EvalError::Dataset { .. } => CliError::new("E_DATASET", 1, message),
            EvalError::Io(_) => CliError::io(message),
            EvalError::Config(_) | EvalError::Prompt(_) => CliError::config(message),
            EvalError::MetricUnavailable(_) => CliError::new("E_METRIC_UNAVAILABLE", 3, message),
            EvalError::Shape(_) | EvalError::EmptyRegion => CliError::new("E_METRIC", 1, message),
        }
    }
}
