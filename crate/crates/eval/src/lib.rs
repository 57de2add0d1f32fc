//! Metrics over prediction files: accuracy per alignment group or per action
//! count, the high/low bias gap, spread across repeats, and token/latency
//! means from run records.
//!
//! Abstentions count as incorrect. Groups without predictions are left out
//! rather than reported as zero. Reports keep full precision in JSON and
//! round half-up to two decimals in Markdown.

pub mod accuracy;
pub mod report;
pub mod round;
pub mod runtime;
pub mod stats;

pub use accuracy::{accuracy, avg_acc, bias, group_label, Accuracy, EvalError, Tally};
pub use report::{emit_report, EvalReport, ModeReport, ReportFormat, SweepRow, SweepSummary, ACTION_COUNTS};
pub use round::{fmt2, fmt_half_up};
pub use runtime::{runtime_report, runtime_stats, RuntimeReport, RuntimeStats};
pub use stats::{repeat_stats, RepeatStats};
