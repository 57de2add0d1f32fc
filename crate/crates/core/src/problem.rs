use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::constraint::Constraint;
use crate::error::ProblemError;
use crate::grid::Grid;

/// Verbal value for an (action, attribute) pair the extraction never mentioned.
pub const NOT_MENTIONED: &str = "not mentioned";

/// How choice numbers are shown to (and read back from) the model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceIndexing {
    ZeroBased,
    #[default]
    OneBased,
}

impl ChoiceIndexing {
    pub fn offset(self) -> usize {
        match self {
            Self::ZeroBased => 0,
            Self::OneBased => 1,
        }
    }

    /// Visible number for an internal index.
    pub fn display(self, index: usize) -> usize {
        index + self.offset()
    }
}

/// Lexical canonical form of an attribute name: lowercase, punctuation
/// replaced by spaces, whitespace collapsed.
pub fn canonical_attribute(name: &str) -> String {
    let lowered: String = name
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Scenario, candidate actions and constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProblem")]
pub struct DecisionProblem {
    id: String,
    scenario: String,
    actions: Vec<String>,
    #[serde(default)]
    constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias_directive: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_answer: Option<usize>,
    #[serde(default)]
    indexing: ChoiceIndexing,
}

#[derive(Deserialize)]
struct RawProblem {
    id: String,
    scenario: String,
    actions: Vec<String>,
    #[serde(default)]
    constraints: Vec<Constraint>,
    #[serde(default)]
    bias_directive: Option<String>,
    #[serde(default)]
    gold_answer: Option<usize>,
    #[serde(default)]
    indexing: ChoiceIndexing,
}

impl TryFrom<RawProblem> for DecisionProblem {
    type Error = ProblemError;

    fn try_from(raw: RawProblem) -> Result<Self, Self::Error> {
        let mut problem = Self::new(raw.id, raw.scenario, raw.actions)?
            .with_constraints(raw.constraints)?
            .with_indexing(raw.indexing);
        if let Some(bias) = raw.bias_directive {
            problem = problem.with_bias(bias);
        }
        if let Some(gold) = raw.gold_answer {
            problem = problem.with_gold(gold)?;
        }
        Ok(problem)
    }
}

impl DecisionProblem {
    pub fn new(
        id: impl Into<String>,
        scenario: impl Into<String>,
        actions: Vec<String>,
    ) -> Result<Self, ProblemError> {
        if actions.len() < 2 {
            return Err(ProblemError::TooFewActions(actions.len()));
        }
        let mut seen = HashSet::new();
        for (i, label) in actions.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(ProblemError::EmptyAction(i));
            }
            if !seen.insert(label.as_str()) {
                return Err(ProblemError::DuplicateAction(label.clone()));
            }
        }
        Ok(Self {
            id: id.into(),
            scenario: scenario.into(),
            actions,
            constraints: Vec::new(),
            bias_directive: None,
            gold_answer: None,
            indexing: ChoiceIndexing::default(),
        })
    }

    pub fn with_constraints(mut self, constraints: Vec<Constraint>) -> Result<Self, ProblemError> {
        let n = self.actions.len();
        for c in &constraints {
            if let crate::ConstraintKind::Exclusion { action } = c.kind {
                if action >= n {
                    return Err(ProblemError::ConstraintOutOfRange {
                        text: c.source_text.clone(),
                        index: action,
                        n,
                    });
                }
            }
        }
        self.constraints = constraints;
        Ok(self)
    }

    pub fn with_bias(mut self, directive: impl Into<String>) -> Self {
        self.bias_directive = Some(directive.into());
        self
    }

    pub fn with_gold(mut self, gold: usize) -> Result<Self, ProblemError> {
        if gold >= self.actions.len() {
            return Err(ProblemError::GoldOutOfRange {
                gold,
                n: self.actions.len(),
            });
        }
        self.gold_answer = Some(gold);
        Ok(self)
    }

    pub fn with_indexing(mut self, indexing: ChoiceIndexing) -> Self {
        self.indexing = indexing;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn n(&self) -> usize {
        self.actions.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn bias_directive(&self) -> Option<&str> {
        self.bias_directive.as_deref()
    }

    pub fn gold_answer(&self) -> Option<usize> {
        self.gold_answer
    }

    pub fn indexing(&self) -> ChoiceIndexing {
        self.indexing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceCell {
    pub verbal: String,
    /// Grounded score in `[0, 1]`, absent until scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl RelevanceCell {
    pub fn verbal(text: impl Into<String>) -> Self {
        Self {
            verbal: text.into(),
            value: None,
        }
    }

    pub fn not_mentioned() -> Self {
        Self::verbal(NOT_MENTIONED)
    }

    pub fn is_mentioned(&self) -> bool {
        self.verbal != NOT_MENTIONED
    }
}

/// Attributes `P` and the `n x m` relevance grid `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    attributes: Vec<String>,
    cells: Vec<Vec<RelevanceCell>>,
}

impl AttributeTable {
    pub fn new(
        n: usize,
        attributes: Vec<String>,
        cells: Vec<Vec<RelevanceCell>>,
    ) -> Result<Self, ProblemError> {
        let m = attributes.len();
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(canonical_attribute(a)) {
                return Err(ProblemError::DuplicateAttribute(a.clone()));
            }
        }
        let bad_row = cells.iter().find(|row| row.len() != m);
        if cells.len() != n || bad_row.is_some() {
            return Err(ProblemError::TableShape {
                rows: n,
                cols: m,
                found_rows: cells.len(),
                found_cols: bad_row.map_or(m, Vec::len),
            });
        }
        for (i, row) in cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell.value {
                    check_unit(i, j, v)?;
                }
            }
        }
        Ok(Self { attributes, cells })
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn m(&self) -> usize {
        self.attributes.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &RelevanceCell {
        &self.cells[row][col]
    }

    pub fn set_value(&mut self, row: usize, col: usize, value: f64) -> Result<(), ProblemError> {
        check_unit(row, col, value)?;
        self.cells[row][col].value = Some(value);
        Ok(())
    }

    /// Numeric `R`; fails on the first ungrounded cell.
    pub fn numeric(&self) -> Result<Grid, ProblemError> {
        let mut grid = Grid::zeros(self.n(), self.m());
        for (i, row) in self.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let v = cell.value.ok_or(ProblemError::Ungrounded { row: i, col: j })?;
                grid.set(i, j, v);
            }
        }
        Ok(grid)
    }
}

fn check_unit(row: usize, col: usize, value: f64) -> Result<(), ProblemError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ProblemError::RelevanceRange { row, col, value })
    }
}
