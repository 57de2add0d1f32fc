//! Steps 2 through 4 of the decision kernel: sparsify, mask, aggregate, select.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraint::{feasible_actions, Constraint};
use crate::error::KernelError;
use crate::grid::Grid;

/// Per-cell importance weights `w`, all finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Grid", into = "Grid")]
pub struct WeightMatrix(Grid);

impl WeightMatrix {
    pub fn new(grid: Grid) -> Result<Self, KernelError> {
        for (row, col, value) in grid.cells() {
            if !value.is_finite() || value < 0.0 {
                return Err(KernelError::InvalidWeight { row, col, value });
            }
        }
        Ok(Self(grid))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, KernelError> {
        Self::new(Grid::from_rows(rows)?)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self(Grid::filled(rows, cols, 1.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl TryFrom<Grid> for WeightMatrix {
    type Error = KernelError;

    fn try_from(grid: Grid) -> Result<Self, Self::Error> {
        Self::new(grid)
    }
}

impl From<WeightMatrix> for Grid {
    fn from(w: WeightMatrix) -> Self {
        w.0
    }
}

/// The masked relevance grid `R' = w' ∘ R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilteredMatrix(Grid);

impl FilteredMatrix {
    /// Wraps an arbitrary grid. Only [`apply_mask`] guarantees the product
    /// relation with a weight matrix.
    pub fn from_grid(grid: Grid) -> Self {
        Self(grid)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }
}

/// Which weights survive sparsification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawPolicy")]
pub enum FilterPolicy {
    /// Keep an entry iff `|w| > epsilon`.
    Threshold { epsilon: f64 },
    /// Keep the `k` largest-magnitude entries of each row.
    TopK { k: usize },
    None,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawPolicy {
    Threshold { epsilon: f64 },
    TopK { k: usize },
    None,
}

impl TryFrom<RawPolicy> for FilterPolicy {
    type Error = KernelError;

    fn try_from(raw: RawPolicy) -> Result<Self, Self::Error> {
        match raw {
            RawPolicy::Threshold { epsilon } => Self::threshold(epsilon),
            RawPolicy::TopK { k } => Self::top_k(k),
            RawPolicy::None => Ok(Self::None),
        }
    }
}

impl FilterPolicy {
    pub fn threshold(epsilon: f64) -> Result<Self, KernelError> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(KernelError::InvalidPolicy(format!(
                "threshold must be finite and >= 0, got {epsilon}"
            )));
        }
        Ok(Self::Threshold { epsilon })
    }

    pub fn top_k(k: usize) -> Result<Self, KernelError> {
        if k == 0 {
            return Err(KernelError::InvalidPolicy("top-k needs k >= 1".into()));
        }
        Ok(Self::TopK { k })
    }
}

impl fmt::Display for FilterPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Threshold { epsilon } => write!(f, "eps={epsilon}"),
            Self::TopK { k } => write!(f, "top{k}"),
            Self::None => f.write_str("none"),
        }
    }
}

impl FromStr for FilterPolicy {
    type Err = KernelError;

    /// Accepts `none`, `top<k>` / `top-<k>` / `top_<k>`, `eps=<x>` or a bare number.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "none" || s == "no-selection" {
            return Ok(Self::None);
        }
        if let Some(rest) = s.strip_prefix("top") {
            let rest = rest.trim_start_matches(['-', '_', ' ']);
            return rest
                .parse::<usize>()
                .map_err(|_| KernelError::InvalidPolicy(format!("bad top-k value {s:?}")))
                .and_then(Self::top_k);
        }
        let number = s.strip_prefix("eps=").unwrap_or(&s);
        number
            .parse::<f64>()
            .map_err(|_| KernelError::InvalidPolicy(format!("unrecognized policy {s:?}")))
            .and_then(Self::threshold)
    }
}

pub fn sparsify_weights(w: &WeightMatrix, policy: &FilterPolicy) -> WeightMatrix {
    let mut grid = w.0.clone();
    match *policy {
        FilterPolicy::None => {}
        FilterPolicy::Threshold { epsilon } => {
            grid = grid.map(|v| if v.abs() > epsilon { v } else { 0.0 });
        }
        FilterPolicy::TopK { k } => {
            for i in 0..grid.rows() {
                let row = grid.row_mut(i);
                let mut order: Vec<usize> = (0..row.len()).collect();
                // stable sort: equal magnitudes keep ascending column order
                order.sort_by(|&a, &b| row[b].abs().total_cmp(&row[a].abs()));
                for &j in order.iter().skip(k) {
                    row[j] = 0.0;
                }
            }
        }
    }
    WeightMatrix(grid)
}

pub fn apply_mask(w_prime: &WeightMatrix, r: &Grid) -> Result<FilteredMatrix, KernelError> {
    let w = &w_prime.0;
    if w.shape() != r.shape() {
        return Err(KernelError::Shape {
            left_rows: w.rows(),
            left_cols: w.cols(),
            right_rows: r.rows(),
            right_cols: r.cols(),
        });
    }
    let mut out = Grid::zeros(r.rows(), r.cols());
    for (i, j, weight) in w.cells() {
        if weight != 0.0 {
            out.set(i, j, weight * r.get(i, j));
        }
    }
    Ok(FilteredMatrix(out))
}

/// Per-action utility: the row sums of `R'`.
pub fn row_utilities(r_prime: &FilteredMatrix) -> Vec<f64> {
    let grid = &r_prime.0;
    (0..grid.rows()).map(|i| grid.row(i).iter().sum()).collect()
}

/// Feasible argmax; among tied maxima the lowest index wins.
pub fn select_action(utilities: &[f64], feasible: &BTreeSet<usize>) -> Result<usize, KernelError> {
    let n = utilities.len();
    let mut best: Option<usize> = None;
    for &i in feasible {
        if i >= n {
            return Err(KernelError::IndexOutOfRange { index: i, n });
        }
        match best {
            Some(b) if utilities[i] <= utilities[b] => {}
            _ => best = Some(i),
        }
    }
    best.ok_or(KernelError::Infeasible)
}

/// Best feasible action other than `answer`, if any.
pub fn runner_up(utilities: &[f64], feasible: &BTreeSet<usize>, answer: usize) -> Option<usize> {
    let rest: BTreeSet<usize> = feasible.iter().copied().filter(|&i| i != answer).collect();
    select_action(utilities, &rest).ok()
}

/// Everything the kernel computed for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicSolution {
    pub answer: usize,
    pub utilities: Vec<f64>,
    pub sparsified: WeightMatrix,
    pub filtered: FilteredMatrix,
    pub feasible: BTreeSet<usize>,
    /// Set when every entry of `R'` is zero, including the `m = 0` case.
    pub degenerate: bool,
}

pub fn solve_symbolic(
    r: &Grid,
    w: &WeightMatrix,
    policy: &FilterPolicy,
    constraints: &[Constraint],
) -> Result<SymbolicSolution, KernelError> {
    let sparsified = sparsify_weights(w, policy);
    let filtered = apply_mask(&sparsified, r)?;
    let utilities = row_utilities(&filtered);
    let feasible = feasible_actions(constraints, r.rows());
    let answer = select_action(&utilities, &feasible)?;
    let degenerate = filtered.0.count_nonzero() == 0;
    Ok(SymbolicSolution {
        answer,
        utilities,
        sparsified,
        filtered,
        feasible,
        degenerate,
    })
}

/// Human-readable objective, one `weight*symbol*x<i>` term per surviving cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRendering {
    pub term: String,
    /// `(symbol, action index, attribute name)` for every symbol in `term`.
    pub symbols: Vec<(String, usize, String)>,
}

pub fn render_objective(w_prime: &WeightMatrix, attributes: &[String]) -> ObjectiveRendering {
    let grid = &w_prime.0;
    let mut terms = Vec::new();
    let mut symbols = Vec::new();
    for (i, j, weight) in grid.cells() {
        if weight == 0.0 {
            continue;
        }
        let symbol = format!("r{}_{}", i + 1, j + 1);
        terms.push(format!("{weight}*{symbol}*x{}", i + 1));
        let name = attributes.get(j).cloned().unwrap_or_default();
        symbols.push((symbol, i, name));
    }
    let term = if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    };
    ObjectiveRendering { term, symbols }
}
