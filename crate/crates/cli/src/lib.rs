//! Library side of the `decisionflow` binary: config loading, the bounded
//! run pool, and the `run`, `eval`, `sweep` and `replay-verify` commands.
//!
//! Exit statuses: 0 when every run answered, 2 when some runs abstained,
//! 1 on a fatal error (bad config or dataset, replay miss, interruption).

pub mod config;
pub mod error;
pub mod eval_cmd;
pub mod output;
pub mod pool;
pub mod run;
pub mod setup;
pub mod sweep;
pub mod verify;

pub use config::{parse_epsilons, parse_top_k, policy_label, CliConfig, Overrides, TranscriptModeArg};
pub use error::{CliError, Exit};
pub use eval_cmd::execute_eval;
pub use run::{execute_run, read_runs, Manifest, ProblemSummary, RunOutcome};
pub use sweep::{execute_sweep, SweepManifest, SweepOutcome};
pub use verify::{execute_verify, Gap, VerifyReport};
