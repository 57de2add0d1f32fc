use std::sync::atomic::AtomicBool;

use decisionflow_core::Stage;
use decisionflow_gateway::GatewayError;
use decisionflow_pipeline::RunErrorKind;
use serde::{Deserialize, Serialize};

use crate::config::{CliConfig, TranscriptModeArg};
use crate::error::CliError;
use crate::pool::{run_bounded, Step};
use crate::setup::Setup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub problem: String,
    pub repeat: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    /// Request digest for a replay miss, the error text otherwise.
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_digest: String,
    pub runs: usize,
    pub requests: usize,
    pub network_calls: usize,
    pub gaps: Vec<Gap>,
}

impl VerifyReport {
    pub fn complete(&self) -> bool {
        self.gaps.is_empty() && self.network_calls == 0
    }
}

/// Replays every run of the config against its transcript directory and
/// lists the runs that hit a missing or unreadable transcript. Only the first
/// gap of a run is visible, since later prompts depend on the missing reply.
pub fn execute_verify(cfg: &CliConfig, cancel: &AtomicBool) -> Result<VerifyReport, CliError> {
    let setup = Setup::new(cfg, TranscriptModeArg::Replay)?;
    let jobs = setup.jobs(cfg.repeats, cfg.seed);
    let results = run_bounded(&jobs, cfg.pipeline.max_concurrency, cancel, |&(p, repeat)| {
        let problem = &setup.problems[p];
        let gap = match setup.pipeline.run(problem, repeat) {
            Err(e) if e.is_fatal() => Some(Gap {
                problem: problem.id().to_string(),
                repeat,
                stage: e.stage,
                detail: match &e.kind {
                    RunErrorKind::Gateway(GatewayError::ReplayMiss { digest, .. }) => digest.clone(),
                    other => other.to_string(),
                },
            }),
            _ => None,
        };
        Step::Done(gap)
    });
    let stats = setup.gateway.stats();
    let mut gaps: Vec<Gap> = results.into_iter().filter_map(|(_, g)| g).collect();
    gaps.sort_by(|a, b| (&a.problem, a.repeat).cmp(&(&b.problem, b.repeat)));
    Ok(VerifyReport {
        config_digest: cfg.digest(),
        runs: jobs.len(),
        requests: stats.requests,
        network_calls: stats.network_calls,
        gaps,
    })
}
