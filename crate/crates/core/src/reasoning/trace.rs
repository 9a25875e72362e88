//! Append-only decision log, exported as JSON lines.

use serde::Serialize;
use serde_json::Value;

use crate::ssr::ObjectId;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    SsrBuilt {
        objects: usize,
        revision: u64,
    },
    Decomposition {
        subtasks: Vec<String>,
    },
    SubtaskStart {
        query: String,
    },
    LlmCall {
        schema: String,
        attempts: u32,
        payload: Value,
    },
    Assessment {
        round: usize,
        need: String,
        detail: String,
    },
    SemanticRefinement {
        round: usize,
        threshold: f64,
        hint: Vec<String>,
        relabeled: Vec<ObjectId>,
        added: Vec<ObjectId>,
        noop: bool,
        revision: u64,
    },
    SpatialRefinement {
        round: usize,
        outputs: Vec<String>,
        revision: u64,
    },
    Resolution {
        op: String,
        target_ids: Vec<ObjectId>,
        instruction: String,
        inpaint_prompt: String,
        mask_area: u64,
    },
    Inpaint {
        step: usize,
        prompt: String,
        mask_area: u64,
        dilation: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub seq: usize,
    /// 1-based subtask index, absent for events outside any subtask.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtask: Option<usize>,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
    subtask: Option<usize>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tags subsequent events with subtask `j` (1-based).
    pub fn enter_subtask(&mut self, j: usize, query: &str) {
        self.subtask = Some(j);
        self.push(TraceEvent::SubtaskStart {
            query: query.to_string(),
        });
    }

    pub fn leave_subtask(&mut self) {
        self.subtask = None;
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.records.push(TraceRecord {
            seq: self.records.len(),
            subtask: self.subtask,
            event,
        });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, pred: impl Fn(&TraceEvent) -> bool) -> usize {
        self.records.iter().filter(|r| pred(&r.event)).count()
    }

    /// One JSON object per line, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace records serialize") + "\n")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_tags_subtasks() {
        let mut t = Trace::new();
        t.push(TraceEvent::SsrBuilt { objects: 2, revision: 0 });
        t.enter_subtask(1, "remove it");
        t.push(TraceEvent::Assessment {
            round: 0,
            need: "none".into(),
            detail: String::new(),
        });
        let text = t.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"seq":0,"event":"ssr_built","objects":2,"revision":0}"#);
        assert_eq!(lines[1], r#"{"seq":1,"subtask":1,"event":"subtask_start","query":"remove it"}"#);
        assert!(lines[2].contains(r#""event":"assessment""#));
    }
}
