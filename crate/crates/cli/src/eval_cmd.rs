use std::path::Path;

use decisionflow_eval::EvalReport;
use decisionflow_pipeline::{Dataset, DatasetKind, PredictionFile};

use crate::error::CliError;
use crate::output::{io_error, write_atomic};
use crate::run::read_runs;

/// Scores a prediction file and writes `report.json` and `report.md` to
/// `out`. Runtime means are included when a `runs.jsonl` is given.
pub fn execute_eval(
    predictions: &Path,
    dataset: &Path,
    kind: DatasetKind,
    runs: Option<&Path>,
    out: &Path,
) -> Result<EvalReport, CliError> {
    let dataset = Dataset::load(dataset, kind)?;
    let text = std::fs::read_to_string(predictions).map_err(io_error(predictions))?;
    let predictions = PredictionFile::parse(&text)?;
    let runs = match runs {
        Some(p) => read_runs(p)?,
        None => Vec::new(),
    };
    let report = EvalReport::build(&predictions, &dataset, &runs)?;
    write_atomic(&out.join("report.json"), report.to_json().as_bytes())?;
    write_atomic(&out.join("report.md"), report.to_markdown().as_bytes())?;
    Ok(report)
}
