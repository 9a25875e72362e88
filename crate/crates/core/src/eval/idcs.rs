//! Instruction-diff consistency score: a two-stage judge. The first stage
//! sees both images but not the request; the second sees the request and the
//! first stage's text but no images.

use image::RgbImage;

use super::EvalError;
use crate::gateway::schemas::{DescribeReply, Reply, ScoreReply};
use crate::gateway::{ChatMessage, ChatRequest, Gateway, GatewayError, Role, Service};
use crate::reasoning::PromptSet;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffReport {
    pub description: String,
    /// Label of the judge that wrote the description.
    pub model: String,
}

fn parse<T: Reply>(payload: &serde_json::Value) -> Result<T, EvalError> {
    T::from_payload(payload).map_err(|detail| {
        EvalError::Gateway(GatewayError::MalformedLlmOutput {
            schema: T::SCHEMA.to_string(),
            detail,
        })
    })
}

fn lift(e: GatewayError) -> EvalError {
    match e {
        GatewayError::NotConfigured(Service::Chat) => EvalError::MetricUnavailable("idcs".into()),
        e => EvalError::Gateway(e),
    }
}

/// Returns the difference report and a score in `1..=5`.
pub fn idcs(
    gw: &Gateway,
    prompts: &PromptSet,
    judge: &str,
    original: &RgbImage,
    edited: &RgbImage,
    query: &str,
) -> Result<(DiffReport, u8), EvalError> {
    let prompt = |name: &str, vars: &[(&str, &str)]| {
        prompts.render(name, vars).map_err(|e| EvalError::Prompt(e.to_string()))
    };

    let describe = ChatRequest::new(
        DescribeReply::SCHEMA,
        vec![ChatMessage::with_images(
            Role::User,
            prompt("idcs_describe", &[])?,
            vec![original.clone(), edited.clone()],
        )],
    );
    let reply: DescribeReply = parse(&gw.chat(&describe).map_err(lift)?.payload)?;
    let report = DiffReport {
        description: reply.description,
        model: judge.to_string(),
    };

    let score = ChatRequest::user(
        ScoreReply::SCHEMA,
        prompt(
            "idcs_score",
            &[("query", query), ("description", &report.description)],
        )?,
    );
    let reply: ScoreReply = parse(&gw.chat(&score).map_err(lift)?.payload)?;
    Ok((report, reply.score))
}
