use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use decisionflow_core::TraceEvent;
use decisionflow_gateway::GatewayStats;
use decisionflow_pipeline::{write_predictions, RunRecord};
use serde::{Deserialize, Serialize};

use crate::config::CliConfig;
use crate::error::{CliError, Exit};
use crate::output::{file_stem, timestamped_dir, write_atomic, write_json};
use crate::pool::{run_bounded, Step};
use crate::setup::Setup;

/// Completion accounting for one problem across its repeats.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub runs: usize,
    pub abstained: usize,
    pub completions: usize,
    /// Attempt index of every completion, in trace order, repeats concatenated.
    pub attempts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub config: CliConfig,
    pub problems: usize,
    pub runs_planned: usize,
    pub runs_completed: usize,
    pub answered: usize,
    pub abstained: usize,
    pub interrupted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatal: Option<String>,
    pub gateway: GatewayStats,
    pub per_problem: BTreeMap<String, ProblemSummary>,
    pub exit_code: i32,
}

pub struct RunOutcome {
    pub exit: Exit,
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<RunRecord>,
}

enum Job {
    Record(RunRecord),
    Fatal(String),
}

/// Runs every (problem, repeat) of the config and writes `manifest.json`,
/// `predictions.jsonl`, `runs.jsonl` and `traces/` under the output dir.
pub fn execute_run(cfg: &CliConfig, cancel: &AtomicBool) -> Result<RunOutcome, CliError> {
    let setup = Setup::new(cfg, cfg.transcript_mode)?;
    let mode = cfg.pipeline.mode;
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| timestamped_dir(mode.name()));
    let jobs = setup.jobs(cfg.repeats, cfg.seed);

    let results = run_bounded(&jobs, cfg.pipeline.max_concurrency, cancel, |&(p, repeat)| {
        let problem = &setup.problems[p];
        let started = Instant::now();
        let result = setup.pipeline.run(problem, repeat);
        match result {
            Err(e) if e.is_fatal() => Step::Halt(Job::Fatal(format!("{} repeat {repeat}: {}: {e}", problem.id(), e.class()))),
            result => Step::Done(Job::Record(RunRecord::from_result(
                problem.id(),
                mode,
                repeat,
                result,
                started.elapsed(),
            ))),
        }
    });

    let mut fatal = None;
    let mut records = Vec::new();
    for (_, job) in results {
        match job {
            Job::Record(r) => records.push(r),
            Job::Fatal(message) => fatal = fatal.or(Some(message)),
        }
    }
    records.sort_by(|a, b| (&a.problem_id, a.repeat).cmp(&(&b.problem_id, b.repeat)));
    let interrupted = fatal.is_none() && records.len() < jobs.len();

    let abstained = records.iter().filter(|r| r.abstain.is_some()).count();
    let exit = if fatal.is_some() || interrupted {
        Exit::Fatal
    } else if abstained > 0 {
        Exit::Partial
    } else {
        Exit::Ok
    };

    let mut per_problem: BTreeMap<String, ProblemSummary> = BTreeMap::new();
    for r in &records {
        let s = per_problem.entry(r.problem_id.clone()).or_default();
        s.runs += 1;
        s.abstained += usize::from(r.abstain.is_some());
        s.completions += r.completions;
        s.attempts.extend(r.trace.events().iter().filter_map(|e| match e {
            TraceEvent::Completion { attempt, .. } => Some(*attempt),
            _ => None,
        }));
    }
    let manifest = Manifest {
        config_digest: cfg.digest(),
        config: cfg.clone(),
        problems: setup.problems.len(),
        runs_planned: jobs.len(),
        runs_completed: records.len(),
        answered: records.len() - abstained,
        abstained,
        interrupted,
        fatal,
        gateway: setup.gateway.stats(),
        per_problem,
        exit_code: exit as i32,
    };
    write_outputs(&out_dir, &manifest, &records)?;
    Ok(RunOutcome {
        exit,
        out_dir,
        manifest,
        records,
    })
}

fn write_outputs(out_dir: &Path, manifest: &Manifest, records: &[RunRecord]) -> Result<(), CliError> {
    for r in records {
        let path = out_dir
            .join("traces")
            .join(file_stem(&r.problem_id))
            .join(format!("{}-r{}.json", r.mode, r.repeat));
        write_json(&path, &r.trace)?;
    }
    write_atomic(&out_dir.join("predictions.jsonl"), write_predictions(records).to_jsonl().as_bytes())?;
    let runs: String = records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect();
    write_atomic(&out_dir.join("runs.jsonl"), runs.as_bytes())?;
    // Written last: a manifest on disk means the other files are complete.
    write_json(&out_dir.join("manifest.json"), manifest)
}

/// Reads a `runs.jsonl` written by [`execute_run`].
pub fn read_runs(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = std::fs::read_to_string(path).map_err(crate::output::io_error(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), k + 1)))
        })
        .collect()
}
