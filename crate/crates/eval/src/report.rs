use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use decisionflow_pipeline::{Dataset, DatasetKind, Group, Mode, PredictionFile, PredictionRow, RunRecord};
use serde::{Deserialize, Serialize};

use crate::accuracy::{accuracy, avg_acc, bias, group_label, Accuracy, EvalError};
use crate::round::fmt2;
use crate::runtime::{runtime_report, RuntimeStats};
use crate::stats::{repeat_stats, RepeatStats};

/// Action counts shown as columns for action-count datasets.
pub const ACTION_COUNTS: std::ops::RangeInclusive<usize> = 2..=7;

/// Metrics of one mode. Percentages are kept at full precision; rounding
/// happens only in the Markdown rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub predictions: usize,
    pub abstentions: usize,
    pub all_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_acc: Option<f64>,
    /// `high_acc - low_acc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_bias: Option<f64>,
    /// Action count (`"2"`..`"7"`) or `"all"` to accuracy; only groups with predictions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_action_count: BTreeMap<String, f64>,
    /// Metric name to its spread over repeats.
    pub repeats: BTreeMap<String, RepeatStats>,
    /// Group label (or `all`) to runtime means; empty without run records.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub runtime: BTreeMap<String, RuntimeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: DatasetKind,
    pub modes: Vec<ModeReport>,
}

fn headline(acc: &Accuracy, kind: DatasetKind) -> BTreeMap<&'static str, f64> {
    let mut m = BTreeMap::new();
    if let Some(all) = acc.all.percent() {
        m.insert("all_acc", all);
    }
    if kind == DatasetKind::Mta {
        if let Some(h) = acc.high() {
            m.insert("high_acc", h);
        }
        if let Some(l) = acc.low() {
            m.insert("low_acc", l);
        }
        if let (Some(h), Some(l)) = (acc.high(), acc.low()) {
            m.insert("avg_acc", avg_acc(h, l));
            m.insert("bias", bias(h, l));
        }
    }
    m
}

impl ModeReport {
    fn build(mode: Mode, rows: &[&PredictionRow], dataset: &Dataset) -> Result<Self, EvalError> {
        let kind = dataset.kind();
        let acc = accuracy(rows.iter().copied(), dataset)?;
        let repeats: BTreeSet<u32> = rows.iter().map(|r| r.repeat).collect();
        let mut per_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for repeat in repeats {
            let acc = accuracy(rows.iter().copied().filter(|r| r.repeat == repeat), dataset)?;
            for (name, v) in headline(&acc, kind) {
                per_metric.entry(name).or_default().push(v);
            }
        }
        let (high, low) = match kind {
            DatasetKind::Mta => (acc.high(), acc.low()),
            DatasetKind::Dellma => (None, None),
        };
        let both = high.zip(low);
        let mut by_action_count = BTreeMap::new();
        if kind == DatasetKind::Dellma {
            for (group, tally) in &acc.groups {
                if let (Group::ActionCount(_), Some(p)) = (group, tally.percent()) {
                    by_action_count.insert(group_label(*group), p);
                }
            }
            by_action_count.insert("all".into(), acc.all.percent().unwrap_or(0.0));
        }
        Ok(Self {
            mode,
            predictions: rows.len(),
            abstentions: rows.iter().filter(|r| r.abstain.is_some()).count(),
            all_acc: acc.all.percent().unwrap_or(0.0),
            high_acc: high,
            low_acc: low,
            avg_acc: both.map(|(h, l)| avg_acc(h, l)),
            bias: both.map(|(h, l)| bias(h, l)),
            abs_bias: both.map(|(h, l)| bias(h, l).abs()),
            by_action_count,
            repeats: per_metric
                .into_iter()
                .filter_map(|(k, v)| repeat_stats(&v).map(|s| (k.to_string(), s)))
                .collect(),
            runtime: BTreeMap::new(),
        })
    }
}

impl EvalReport {
    /// Builds the report for every mode present in `predictions`. `runs` may
    /// be empty, in which case no runtime section is produced.
    pub fn build(predictions: &PredictionFile, dataset: &Dataset, runs: &[RunRecord]) -> Result<Self, EvalError> {
        if let Some(id) = predictions.unknown_ids(dataset).first() {
            return Err(EvalError::UnknownId(id.to_string()));
        }
        let mut runtime = runtime_report(runs, dataset)?;
        let mut modes = Vec::new();
        for mode in Mode::ALL {
            let rows: Vec<&PredictionRow> = predictions.rows.iter().filter(|r| r.mode == mode).collect();
            if rows.is_empty() {
                continue;
            }
            let mut report = ModeReport::build(mode, &rows, dataset)?;
            report.runtime = runtime.remove(mode.name()).unwrap_or_default();
            modes.push(report);
        }
        Ok(Self {
            dataset: dataset.kind(),
            modes,
        })
    }

    /// Canonical JSON: fixed field order, sorted maps, trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let name = match self.dataset {
            DatasetKind::Mta => "mta",
            DatasetKind::Dellma => "dellma",
        };
        let _ = writeln!(out, "# Evaluation ({name})\n");
        match self.dataset {
            DatasetKind::Mta => {
                out.push_str("| Mode | High-acc | Low-acc | Avg-acc | Bias | Abs-bias | N | Abstained |\n");
                out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
                for m in &self.modes {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} | {} | {} |",
                        m.mode,
                        cell(m.high_acc),
                        cell(m.low_acc),
                        cell(m.avg_acc),
                        cell(m.bias),
                        cell(m.abs_bias),
                        m.predictions,
                        m.abstentions
                    );
                }
            }
            DatasetKind::Dellma => {
                out.push_str(&action_count_header("Mode"));
                for m in &self.modes {
                    let _ = writeln!(out, "{}", action_count_row(m.mode.name(), &m.by_action_count));
                }
            }
        }

        out.push_str("\n## Repeats\n\n| Mode | Metric | Mean | Std | Repeats |\n|---|---|---:|---:|---:|\n");
        for m in &self.modes {
            for (metric, s) in &m.repeats {
                let n = if s.single { "1 (single)".to_string() } else { s.repeats.to_string() };
                let _ = writeln!(out, "| {} | {metric} | {} | {} | {n} |", m.mode, fmt2(s.mean), fmt2(s.sample_std));
            }
        }

        if self.modes.iter().any(|m| !m.runtime.is_empty()) {
            out.push_str(
                "\n## Runtime\n\n| Mode | Group | Runs | Prompt tokens | Response tokens | Latency (s) | Approximate |\n|---|---|---:|---:|---:|---:|---|\n",
            );
            for m in &self.modes {
                for (group, s) in &m.runtime {
                    let _ = writeln!(
                        out,
                        "| {} | {group} | {} | {} | {} | {} | {} |",
                        m.mode,
                        s.runs,
                        fmt2(s.mean_prompt_tokens),
                        fmt2(s.mean_response_tokens),
                        fmt2(s.mean_latency_secs),
                        if s.approximate { "yes" } else { "no" }
                    );
                }
            }
        }
        out
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt2).unwrap_or_else(|| "-".into())
}

fn action_count_header(first: &str) -> String {
    let counts: Vec<String> = ACTION_COUNTS.map(|n| n.to_string()).collect();
    format!(
        "| {first} | {} | All |\n|---|{}---:|\n",
        counts.join(" | "),
        "---:|".repeat(counts.len())
    )
}

fn action_count_row(label: &str, by_count: &BTreeMap<String, f64>) -> String {
    let cells: Vec<String> = ACTION_COUNTS
        .map(|n| cell(by_count.get(&n.to_string()).copied()))
        .collect();
    format!("| {label} | {} | {} |", cells.join(" | "), cell(by_count.get("all").copied()))
}

/// One setting of a hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: String,
    /// Mean number of nonzero filtered cells per problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_surviving_cells: Option<f64>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    /// `epsilon` or `top_k`.
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize") + "\n"
    }

    /// One line per setting, using the first mode of each report.
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Sweep over {}\n\n", self.parameter);
        let kind = self.rows.first().map(|r| r.report.dataset).unwrap_or(DatasetKind::Mta);
        match kind {
            DatasetKind::Mta => {
                let _ = writeln!(
                    out,
                    "| {} | High-acc | Low-acc | Avg-acc | Bias | Surviving cells |\n|---|---:|---:|---:|---:|---:|",
                    self.parameter
                );
                for row in &self.rows {
                    let m = row.report.modes.first();
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {} | {} |",
                        row.setting,
                        cell(m.and_then(|m| m.high_acc)),
                        cell(m.and_then(|m| m.low_acc)),
                        cell(m.and_then(|m| m.avg_acc)),
                        cell(m.and_then(|m| m.bias)),
                        cell(row.mean_surviving_cells)
                    );
                }
            }
            DatasetKind::Dellma => {
                out.push_str(&action_count_header(&self.parameter));
                for row in &self.rows {
                    let empty = BTreeMap::new();
                    let by = row.report.modes.first().map(|m| &m.by_action_count).unwrap_or(&empty);
                    let _ = writeln!(out, "{}", action_count_row(&row.setting, by));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

/// Writes `report` to `path` in the given format.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    std::fs::write(path, text)
}
