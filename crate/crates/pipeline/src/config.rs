use std::fmt;
use std::str::FromStr;

use decisionflow_core::FilterPolicy;
use decisionflow_gateway::DEFAULT_MAX_TOKENS;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Decisionflow,
    ZeroShot,
    Cot,
    CotWithTools,
    SelfConsistency,
    Joint,
    AblateNoFilter,
    AblateNoScoring,
    AblateNoBoth,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Self::Decisionflow,
        Self::ZeroShot,
        Self::Cot,
        Self::CotWithTools,
        Self::SelfConsistency,
        Self::Joint,
        Self::AblateNoFilter,
        Self::AblateNoScoring,
        Self::AblateNoBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Decisionflow => "decisionflow",
            Self::ZeroShot => "zero_shot",
            Self::Cot => "cot",
            Self::CotWithTools => "cot_with_tools",
            Self::SelfConsistency => "self_consistency",
            Self::Joint => "joint",
            Self::AblateNoFilter => "ablate_no_filter",
            Self::AblateNoScoring => "ablate_no_scoring",
            Self::AblateNoBoth => "ablate_no_both",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Which matrix the filter policy sparsifies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterTarget {
    /// Sparsify the weights before grounding (the default).
    #[default]
    Weights,
    /// Ground every weighed cell, then sparsify the grounded scores.
    Relevance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Model for extraction and attribute summaries.
    pub info_model: String,
    /// Model for weighing, grounding and rationales, and for every baseline.
    pub reasoning_model: String,
    pub filter_policy: FilterPolicy,
    pub filter_target: FilterTarget,
    pub temperature_deterministic: f64,
    pub temperature_sampling: f64,
    pub self_consistency_k: u32,
    pub max_tokens: u32,
    /// Concurrent per-pair weighing calls within one run.
    pub max_concurrency: usize,
    /// One weighing call per run instead of one per cell.
    pub batch_weighing: bool,
    pub mode: Mode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            info_model: "gpt-4o".into(),
            reasoning_model: "gpt-4o".into(),
            filter_policy: FilterPolicy::Threshold { epsilon: 0.3 },
            filter_target: FilterTarget::Weights,
            temperature_deterministic: 0.0,
            temperature_sampling: 0.7,
            self_consistency_k: 3,
            max_tokens: DEFAULT_MAX_TOKENS,
            max_concurrency: 4,
            batch_weighing: false,
            mode: Mode::Decisionflow,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.self_consistency_k == 0 || self.self_consistency_k.is_multiple_of(2) {
            return Err(format!(
                "self_consistency_k must be odd and at least 1, got {}",
                self.self_consistency_k
            ));
        }
        for (name, t) in [
            ("temperature_deterministic", self.temperature_deterministic),
            ("temperature_sampling", self.temperature_sampling),
        ] {
            if !t.is_finite() || t < 0.0 {
                return Err(format!("{name} must be a non-negative number, got {t}"));
            }
        }
        if self.max_tokens == 0 {
            return Err("max_tokens must be positive".into());
        }
        if self.max_concurrency == 0 {
            return Err("max_concurrency must be positive".into());
        }
        if self.info_model.trim().is_empty() || self.reasoning_model.trim().is_empty() {
            return Err("model identifiers must be non-empty".into());
        }
        Ok(())
    }
}
