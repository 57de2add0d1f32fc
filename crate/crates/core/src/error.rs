use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Shape {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("ragged grid: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid weight {value} at ({row}, {col}): weights must be finite and >= 0")]
    InvalidWeight { row: usize, col: usize, value: f64 },
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
    #[error("no feasible action remains after applying constraints")]
    Infeasible,
    #[error("action index {index} out of range for {n} actions")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("utility vector has length {found}, expected {expected}")]
    UtilityLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("a decision problem needs at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("action {0} has an empty label")]
    EmptyAction(usize),
    #[error("duplicate action label {0:?}")]
    DuplicateAction(String),
    #[error("gold answer {gold} out of range for {n} actions")]
    GoldOutOfRange { gold: usize, n: usize },
    #[error("constraint {text:?} references action {index} but only {n} actions exist")]
    ConstraintOutOfRange { text: String, index: usize, n: usize },
    #[error("attribute {0:?} appears more than once after canonicalization")]
    DuplicateAttribute(String),
    #[error("relevance grid is {found_rows}x{found_cols}, expected {rows}x{cols}")]
    TableShape {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("relevance value {value} at ({row}, {col}) outside [0, 1]")]
    RelevanceRange { row: usize, col: usize, value: f64 },
    #[error("cell ({row}, {col}) has no grounded value")]
    Ungrounded { row: usize, col: usize },
}
