use std::collections::BTreeMap;

use decisionflow_pipeline::{Dataset, RunRecord};
use serde::{Deserialize, Serialize};

use crate::accuracy::{group_label, EvalError};

/// Per-run means over a group of run records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub runs: usize,
    pub mean_prompt_tokens: f64,
    pub mean_response_tokens: f64,
    pub mean_latency_secs: f64,
    /// At least one record's token counts were estimated, not reported.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
}

/// Means of a non-empty set of records; `None` when empty.
pub fn runtime_stats<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Option<RuntimeStats> {
    let (mut n, mut prompt, mut response, mut latency, mut approximate) = (0usize, 0u64, 0u64, 0.0, false);
    for r in records {
        n += 1;
        prompt += r.usage.prompt_tokens;
        response += r.usage.response_tokens;
        latency += r.latency_secs;
        approximate |= r.usage.approximate;
    }
    (n > 0).then(|| RuntimeStats {
        runs: n,
        mean_prompt_tokens: prompt as f64 / n as f64,
        mean_response_tokens: response as f64 / n as f64,
        mean_latency_secs: latency / n as f64,
        approximate,
    })
}

/// Runtime means keyed by mode name, then by group label (`all` always present).
pub type RuntimeReport = BTreeMap<String, BTreeMap<String, RuntimeStats>>;

pub fn runtime_report(records: &[RunRecord], dataset: &Dataset) -> Result<RuntimeReport, EvalError> {
    let mut grouped: BTreeMap<String, BTreeMap<String, Vec<&RunRecord>>> = BTreeMap::new();
    for r in records {
        let (_, group) = dataset
            .lookup(&r.problem_id)
            .ok_or_else(|| EvalError::UnknownId(r.problem_id.clone()))?;
        let by_group = grouped.entry(r.mode.name().to_string()).or_default();
        by_group.entry(group_label(group)).or_default().push(r);
        by_group.entry("all".into()).or_default().push(r);
    }
    Ok(grouped
        .into_iter()
        .map(|(mode, groups)| {
            let stats = groups
                .into_iter()
                .filter_map(|(g, rs)| runtime_stats(rs).map(|s| (g, s)))
                .collect();
            (mode, stats)
        })
        .collect())
}
