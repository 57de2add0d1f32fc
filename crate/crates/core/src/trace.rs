//! Stage tags, token usage and the ordered record of one decision run.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::grid::Grid;

/// The four pipeline steps, in data-flow order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    S1,
    S2,
    S3,
    S4,
}

/// Every prompt-producing stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ExtractInfo,
    SummarizeAttributes,
    Weigh,
    GroundAndDecide,
    Rationale,
    ZeroShot,
    Cot,
    Joint,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::ExtractInfo,
        Stage::SummarizeAttributes,
        Stage::Weigh,
        Stage::GroundAndDecide,
        Stage::Rationale,
        Stage::ZeroShot,
        Stage::Cot,
        Stage::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ExtractInfo => "extract_info",
            Self::SummarizeAttributes => "summarize_attributes",
            Self::Weigh => "weigh",
            Self::GroundAndDecide => "ground_and_decide",
            Self::Rationale => "rationale",
            Self::ZeroShot => "zero_shot",
            Self::Cot => "cot",
            Self::Joint => "joint",
        }
    }

    /// Pipeline step the stage belongs to; baselines have none.
    pub fn step(self) -> Option<Step> {
        match self {
            Self::ExtractInfo | Self::SummarizeAttributes => Some(Step::S1),
            Self::Weigh => Some(Step::S2),
            Self::GroundAndDecide => Some(Step::S3),
            Self::Rationale => Some(Step::S4),
            Self::ZeroShot | Self::Cot | Self::Joint => None,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub response_tokens: u64,
    /// Counts came from the whitespace fallback, not the backend.
    #[serde(default)]
    pub approximate: bool,
}

impl Usage {
    pub fn add(&mut self, other: &Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.response_tokens += other.response_tokens;
        self.approximate |= other.approximate;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Completion {
        step: Option<Step>,
        stage: Stage,
        model: String,
        temperature: f64,
        attempt: u32,
        digest: String,
        prompt: String,
        text: String,
        usage: Usage,
        latency_secs: f64,
        cache_hit: bool,
        transport_attempts: u32,
    },
    Parsed {
        step: Option<Step>,
        stage: Stage,
        payload: Value,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        repairs: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    Matrix {
        step: Option<Step>,
        name: String,
        value: Grid,
    },
    Note {
        step: Option<Step>,
        message: String,
    },
}

impl TraceEvent {
    pub fn step(&self) -> Option<Step> {
        match self {
            Self::Completion { step, .. }
            | Self::Parsed { step, .. }
            | Self::Matrix { step, .. }
            | Self::Note { step, .. } => *step,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trace(Vec<TraceEvent>);

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.0.push(event);
    }

    pub fn note(&mut self, step: Option<Step>, message: impl Into<String>) {
        self.push(TraceEvent::Note {
            step,
            message: message.into(),
        });
    }

    pub fn matrix(&mut self, step: Option<Step>, name: impl Into<String>, value: &Grid) {
        self.push(TraceEvent::Matrix {
            step,
            name: name.into(),
            value: value.clone(),
        });
    }

    pub fn extend(&mut self, other: Trace) {
        self.0.extend(other.0);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sum of usage over every completion event.
    pub fn usage_totals(&self) -> Usage {
        let mut total = Usage::default();
        for event in &self.0 {
            if let TraceEvent::Completion { usage, .. } = event {
                total.add(usage);
            }
        }
        total
    }

    pub fn completion_count(&self) -> usize {
        self.0
            .iter()
            .filter(|e| matches!(e, TraceEvent::Completion { .. }))
            .count()
    }

    /// Steps of all step-tagged events, in trace order.
    pub fn steps(&self) -> Vec<Step> {
        self.0.iter().filter_map(TraceEvent::step).collect()
    }
}

/// Selected action, per-action utilities, rationale and the full trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub answer: usize,
    pub utilities: Vec<f64>,
    pub rationale: String,
    #[serde(default)]
    pub degenerate: bool,
    pub trace: Trace,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn completion(prompt_tokens: u64, response_tokens: u64) -> TraceEvent {
        TraceEvent::Completion {
            step: Some(Step::S1),
            stage: Stage::ExtractInfo,
            model: "m".into(),
            temperature: 0.0,
            attempt: 0,
            digest: "d".into(),
            prompt: "p".into(),
            text: "t".into(),
            usage: Usage {
                prompt_tokens,
                response_tokens,
                approximate: false,
            },
            latency_secs: 0.5,
            cache_hit: true,
            transport_attempts: 1,
        }
    }

    #[test]
    fn usage_totals_sum_completions() {
        let mut trace = Trace::new();
        trace.push(completion(10, 3));
        trace.note(Some(Step::S2), "between");
        trace.push(completion(5, 7));
        let u = trace.usage_totals();
        assert_eq!((u.prompt_tokens, u.response_tokens), (15, 10));
        assert_eq!(trace.completion_count(), 2);
        assert_eq!(trace.steps(), vec![Step::S1, Step::S2, Step::S1]);
    }

    #[test]
    fn stage_steps_follow_data_flow() {
        let ordered: Vec<_> = Stage::ALL.iter().filter_map(|s| s.step()).collect();
        let mut sorted = ordered.clone();
        sorted.sort();
        assert_eq!(ordered, sorted);
        assert_eq!(Stage::Joint.step(), None);
    }

    #[test]
    fn events_serialize_with_tag() {
        let json = serde_json::to_string(&TraceEvent::Note {
            step: None,
            message: "m".into(),
        })
        .unwrap();
        assert_eq!(json, r#"{"event":"note","step":null,"message":"m"}"#);
    }
}
