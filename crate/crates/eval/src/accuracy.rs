use std::collections::BTreeMap;

use decisionflow_pipeline::{Alignment, Dataset, Group, PredictionRow};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("prediction id `{0}` is not in the dataset")]
    UnknownId(String),
}

/// Correct over total for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }

    /// `100 * correct / total`; `None` for an empty group.
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}

/// Report-facing label of a group: `high`, `low`, or the action count.
pub fn group_label(group: Group) -> String {
    match group {
        Group::Alignment(a) => a.to_string(),
        Group::ActionCount(n) => n.to_string(),
    }
}

/// Per-group tallies plus the pooled tally over every row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accuracy {
    pub groups: BTreeMap<Group, Tally>,
    pub all: Tally,
}

impl Accuracy {
    pub fn percent(&self, group: Group) -> Option<f64> {
        self.groups.get(&group).and_then(Tally::percent)
    }

    pub fn high(&self) -> Option<f64> {
        self.percent(Group::Alignment(Alignment::High))
    }

    pub fn low(&self) -> Option<f64> {
        self.percent(Group::Alignment(Alignment::Low))
    }
}

/// Scores `rows` against the gold answers. Abstentions count as incorrect;
/// groups without predictions are absent from the result.
pub fn accuracy<'a>(
    rows: impl IntoIterator<Item = &'a PredictionRow>,
    dataset: &Dataset,
) -> Result<Accuracy, EvalError> {
    let mut acc = Accuracy::default();
    for row in rows {
        let (gold, group) = dataset
            .lookup(&row.id)
            .ok_or_else(|| EvalError::UnknownId(row.id.clone()))?;
        let correct = row.answer == Some(gold);
        acc.groups.entry(group).or_default().add(correct);
        acc.all.add(correct);
    }
    Ok(acc)
}

/// `high - low` in percentage points; negative when low-alignment wins.
pub fn bias(high_acc: f64, low_acc: f64) -> f64 {
    high_acc - low_acc
}

/// Unweighted mean of the two alignment groups.
pub fn avg_acc(high_acc: f64, low_acc: f64) -> f64 {
    (high_acc + low_acc) / 2.0
}
