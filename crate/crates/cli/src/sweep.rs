use std::path::PathBuf;
use std::sync::atomic::AtomicBool;

use decisionflow_core::FilterPolicy;
use decisionflow_eval::{EvalReport, SweepRow, SweepSummary};
use decisionflow_gateway::GatewayStats;
use decisionflow_pipeline::{Artifacts, Mode, PredictionFile, PredictionRow, RunError};
use serde::{Deserialize, Serialize};

use crate::config::{policy_label, CliConfig};
use crate::error::{CliError, Exit};
use crate::output::{timestamped_dir, write_atomic, write_json};
use crate::pool::{run_bounded, Step};
use crate::setup::Setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub config_digest: String,
    pub parameter: String,
    pub settings: Vec<String>,
    /// Gateway counters after the reference runs.
    pub reference: GatewayStats,
    /// Gateway counters after every setting was solved.
    pub total: GatewayStats,
    pub interrupted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatal: Option<String>,
    pub exit_code: i32,
}

pub struct SweepOutcome {
    pub exit: Exit,
    pub out_dir: PathBuf,
    pub summary: SweepSummary,
    pub manifest: SweepManifest,
    /// Nonzero filtered-weight count per setting, one entry per solved run.
    pub surviving: Vec<Vec<usize>>,
}

/// Runs steps 1 to 3 once per (problem, repeat) with nothing filtered, then
/// re-solves offline for each policy. Only the reference runs touch the
/// gateway; each setting adds no requests.
pub fn execute_sweep(
    cfg: &CliConfig,
    parameter: &str,
    policies: &[FilterPolicy],
    cancel: &AtomicBool,
) -> Result<SweepOutcome, CliError> {
    if policies.is_empty() {
        return Err(CliError::Usage("the sweep list is empty".into()));
    }
    let setup = Setup::new(cfg, cfg.transcript_mode)?;
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| timestamped_dir(&format!("sweep-{parameter}")));
    let jobs = setup.jobs(cfg.repeats, cfg.seed);

    let results = run_bounded(&jobs, cfg.pipeline.max_concurrency, cancel, |&(p, repeat)| {
        let result = setup.pipeline.collect_artifacts(&setup.problems[p], repeat);
        match &result {
            Err(e) if e.is_fatal() => Step::Halt(result),
            _ => Step::Done(result),
        }
    });
    let reference = setup.gateway.stats();
    let fatal = results.iter().find_map(|(k, r)| match r {
        Err(e) if e.is_fatal() => Some(fatal_message(&setup, jobs[*k], e)),
        _ => None,
    });
    let interrupted = fatal.is_none() && results.len() < jobs.len();

    let mut rows = Vec::new();
    let mut surviving = Vec::new();
    let mut abstained = false;
    if fatal.is_none() && !interrupted {
        for policy in policies {
            let (predictions, counts) = solve_setting(&setup, &jobs, &results, policy);
            abstained |= predictions.rows.iter().any(|r| r.abstain.is_some());
            let report = EvalReport::build(&predictions, &setup.dataset, &[])?;
            let label = policy_label(policy);
            let dir = out_dir.join(format!("{parameter}-{label}"));
            write_atomic(&dir.join("predictions.jsonl"), predictions.to_jsonl().as_bytes())?;
            write_atomic(&dir.join("report.json"), report.to_json().as_bytes())?;
            write_atomic(&dir.join("report.md"), report.to_markdown().as_bytes())?;
            let mean = (!counts.is_empty()).then(|| counts.iter().sum::<usize>() as f64 / counts.len() as f64);
            rows.push(SweepRow {
                setting: label,
                mean_surviving_cells: mean,
                report,
            });
            surviving.push(counts);
        }
    }

    let summary = SweepSummary {
        parameter: parameter.to_string(),
        rows,
    };
    let exit = if fatal.is_some() || interrupted {
        Exit::Fatal
    } else if abstained {
        Exit::Partial
    } else {
        Exit::Ok
    };
    let manifest = SweepManifest {
        config_digest: cfg.digest(),
        parameter: parameter.to_string(),
        settings: policies.iter().map(policy_label).collect(),
        reference,
        total: setup.gateway.stats(),
        interrupted,
        fatal,
        exit_code: exit as i32,
    };
    write_atomic(&out_dir.join("sweep.json"), summary.to_json().as_bytes())?;
    write_atomic(&out_dir.join("sweep.md"), summary.to_markdown().as_bytes())?;
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(SweepOutcome {
        exit,
        out_dir,
        summary,
        manifest,
        surviving,
    })
}

fn fatal_message(setup: &Setup, (p, repeat): (usize, u32), e: &RunError) -> String {
    format!("{} repeat {repeat}: {}: {e}", setup.problems[p].id(), e.class())
}

fn solve_setting(
    setup: &Setup,
    jobs: &[(usize, u32)],
    results: &[(usize, Result<Artifacts, RunError>)],
    policy: &FilterPolicy,
) -> (PredictionFile, Vec<usize>) {
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (k, result) in results {
        let (p, repeat) = jobs[*k];
        let problem = &setup.problems[p];
        let (answer, abstain) = match result {
            Ok(artifacts) => match artifacts.solve(policy, problem) {
                Ok(s) => {
                    counts.push(s.sparsified.grid().count_nonzero());
                    (Some(s.answer), None)
                }
                Err(e) => (None, Some(format!("solve:{}", kernel_class(&e)))),
            },
            Err(e) => (None, Some(e.class())),
        };
        rows.push(PredictionRow {
            id: problem.id().to_string(),
            mode: Mode::Decisionflow,
            repeat,
            answer,
            abstain,
        });
    }
    rows.sort_by(|a, b| (&a.id, a.repeat).cmp(&(&b.id, b.repeat)));
    (PredictionFile { rows }, counts)
}

fn kernel_class(e: &decisionflow_core::KernelError) -> &'static str {
    match e {
        decisionflow_core::KernelError::Infeasible => "infeasible",
        _ => "kernel",
    }
}
