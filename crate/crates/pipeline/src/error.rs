use decisionflow_core::{KernelError, ProblemError, Stage, Trace};
use decisionflow_gateway::GatewayError;
use decisionflow_stages::{StageError, TemplateError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunErrorKind {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("every sampled answer abstained")]
    AllAbstained,
}

/// A failed run: where it failed, why, and everything produced before.
#[derive(Debug, Error)]
#[error("{} failed: {kind}", stage.map_or("run", Stage::name))]
pub struct RunError {
    pub stage: Option<Stage>,
    pub kind: RunErrorKind,
    pub trace: Trace,
}

impl RunError {
    /// Failures that invalidate the whole experiment rather than one answer:
    /// a replay miss, an unusable transcript store or a malformed request.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self.kind,
            RunErrorKind::Gateway(
                GatewayError::ReplayMiss { .. }
                    | GatewayError::Store(_)
                    | GatewayError::InvalidRequest(_)
                    | GatewayError::NoBackend
            ) | RunErrorKind::Template(_)
        )
    }

    /// Short label for abstention rows.
    pub fn class(&self) -> String {
        let detail = match &self.kind {
            RunErrorKind::Gateway(GatewayError::ReplayMiss { .. }) => "replay_miss",
            RunErrorKind::Gateway(GatewayError::Transport { .. }) => "transport",
            RunErrorKind::Gateway(GatewayError::Backend { .. }) => "backend",
            RunErrorKind::Gateway(_) => "gateway",
            RunErrorKind::Stage(e) => e.class(),
            RunErrorKind::Template(_) => "template",
            RunErrorKind::Kernel(KernelError::Infeasible) => "infeasible",
            RunErrorKind::Kernel(_) => "kernel",
            RunErrorKind::Problem(_) => "problem",
            RunErrorKind::AllAbstained => "all_abstained",
        };
        match self.stage {
            Some(stage) => format!("{}:{detail}", stage.name()),
            None => detail.to_string(),
        }
    }
}
