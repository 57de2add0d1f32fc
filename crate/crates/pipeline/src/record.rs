use std::time::Duration;

use decisionflow_core::{DecisionOutcome, Stage, Trace, TraceEvent, Usage};
use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstention {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub class: String,
    pub message: String,
}

/// One (problem, repeat) run, answered or abstained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub mode: Mode,
    pub repeat: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstain: Option<Abstention>,
    #[serde(default)]
    pub utilities: Vec<f64>,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub degenerate: bool,
    pub usage: Usage,
    pub completions: usize,
    /// Sum of per-completion latencies as reported by the gateway.
    pub latency_secs: f64,
    /// Wall-clock time of the whole run; not deterministic under replay.
    pub wall_secs: f64,
    pub trace: Trace,
}

impl RunRecord {
    pub fn from_result(
        problem_id: &str,
        mode: Mode,
        repeat: u32,
        result: Result<DecisionOutcome, RunError>,
        wall: Duration,
    ) -> Self {
        let (answer, abstain, utilities, rationale, degenerate, trace) = match result {
            Ok(o) => (Some(o.answer), None, o.utilities, o.rationale, o.degenerate, o.trace),
            Err(e) => {
                let abstention = Abstention {
                    stage: e.stage,
                    class: e.class(),
                    message: e.kind.to_string(),
                };
                (None, Some(abstention), Vec::new(), String::new(), false, e.trace)
            }
        };
        let latency_secs = trace
            .events()
            .iter()
            .map(|e| match e {
                TraceEvent::Completion { latency_secs, .. } => *latency_secs,
                _ => 0.0,
            })
            .sum();
        Self {
            problem_id: problem_id.to_string(),
            mode,
            repeat,
            answer,
            abstain,
            utilities,
            rationale,
            degenerate,
            usage: trace.usage_totals(),
            completions: trace.completion_count(),
            latency_secs,
            wall_secs: wall.as_secs_f64(),
            trace,
        }
    }

    /// Totals equal the sum over the trace's completions.
    pub fn usage_is_additive(&self) -> bool {
        self.usage == self.trace.usage_totals() && self.completions == self.trace.completion_count()
    }
}
