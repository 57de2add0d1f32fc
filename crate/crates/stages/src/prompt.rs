use std::collections::BTreeMap;

use decisionflow_core::{render_objective, AttributeTable, DecisionProblem, WeightMatrix};
use serde::{Deserialize, Serialize};

use crate::error::TemplateError;
use crate::template::{TemplateId, TemplateSet};

/// Kernel result handed to the rationale stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub answer: usize,
    pub utilities: Vec<f64>,
    pub runner_up: Option<usize>,
    /// `(attribute, contribution)` for the chosen row, largest first.
    pub influential: Vec<(String, f64)>,
}

/// A problem plus whatever earlier stages have produced. Each stage renders
/// only from the artifacts it consumes; anything absent leaves its
/// placeholders unfilled and rendering fails naming the first one.
#[derive(Debug, Clone, Copy)]
pub struct PromptContext<'a> {
    problem: &'a DecisionProblem,
    information: Option<&'a [String]>,
    table: Option<&'a AttributeTable>,
    cell: Option<(usize, usize)>,
    pairs: Option<&'a [(usize, usize)]>,
    weights: Option<&'a WeightMatrix>,
    decision: Option<&'a DecisionSummary>,
}

impl<'a> PromptContext<'a> {
    pub fn new(problem: &'a DecisionProblem) -> Self {
        Self {
            problem,
            information: None,
            table: None,
            cell: None,
            pairs: None,
            weights: None,
            decision: None,
        }
    }

    pub fn information(mut self, statements: &'a [String]) -> Self {
        self.information = Some(statements);
        self
    }

    pub fn table(mut self, table: &'a AttributeTable) -> Self {
        self.table = Some(table);
        self
    }

    /// The `(action, attribute)` cell being weighed.
    pub fn cell(mut self, action: usize, attribute: usize) -> Self {
        self.cell = Some((action, attribute));
        self
    }

    pub fn pairs(mut self, pairs: &'a [(usize, usize)]) -> Self {
        self.pairs = Some(pairs);
        self
    }

    /// Sparsified weights `w'`; drives the objective and the cells to ground.
    pub fn weights(mut self, w_prime: &'a WeightMatrix) -> Self {
        self.weights = Some(w_prime);
        self
    }

    pub fn decision(mut self, summary: &'a DecisionSummary) -> Self {
        self.decision = Some(summary);
        self
    }

    fn values(&self) -> BTreeMap<&'static str, String> {
        let p = self.problem;
        let label = |i: usize| p.actions()[i].as_str();
        let mut v = BTreeMap::new();
        v.insert("scenario", p.scenario().to_string());
        v.insert("choices", choices(p));
        v.insert("variables", lines(p.actions().iter().map(|a| a.to_string())));
        v.insert("constraints", constraints(p));
        if let Some(bias) = p.bias_directive() {
            v.insert("target_bias", bias.to_string());
        }
        if let Some(info) = self.information {
            v.insert("information", lines(info.iter().cloned()));
        }
        if let (Some(table), Some((i, j))) = (self.table, self.cell) {
            v.insert("variable", label(i).to_string());
            v.insert("attribute", table.attributes()[j].clone());
            v.insert("value", table.cell(i, j).verbal.clone());
        }
        if let (Some(table), Some(pairs)) = (self.table, self.pairs) {
            v.insert(
                "pairs",
                lines(pairs.iter().map(|&(i, j)| {
                    format!(
                        "Variable: \"{}\"; Attribute: \"{}\"; Value: \"{}\"",
                        label(i),
                        table.attributes()[j],
                        table.cell(i, j).verbal
                    )
                })),
            );
        }
        if let (Some(table), Some(w)) = (self.table, self.weights) {
            let objective = render_objective(w, table.attributes());
            let mut symbols: Vec<String> = objective
                .symbols
                .iter()
                .map(|(sym, i, attr)| {
                    let j = table.attributes().iter().position(|a| a == attr);
                    let fixed = j.is_some_and(|j| !table.cell(*i, j).is_mentioned());
                    if fixed {
                        format!("\"{sym}\": fixed at 0, \"{attr}\" is not mentioned for \"{}\"", label(*i))
                    } else {
                        format!("\"{sym}\": score of \"{}\" on \"{attr}\"", label(*i))
                    }
                })
                .collect();
            symbols.extend(
                (0..p.n()).map(|i| format!("\"x{}\": 1 if \"{}\" is selected, else 0", i + 1, label(i))),
            );
            let mut cells = Vec::new();
            for (i, j, weight) in w.grid().cells() {
                let cell = table.cell(i, j);
                if weight != 0.0 && cell.is_mentioned() {
                    cells.push(format!(
                        "Variable: \"{}\"; Attribute: \"{}\"; Value: \"{}\"",
                        label(i),
                        table.attributes()[j],
                        cell.verbal
                    ));
                }
            }
            v.insert("objective", objective.term);
            v.insert("symbols", lines(symbols.into_iter()));
            v.insert(
                "attributes_values",
                if cells.is_empty() {
                    "- none".to_string()
                } else {
                    lines(cells.into_iter())
                },
            );
        }
        if let Some(d) = self.decision {
            let shown = |i: usize| format!("({}) {}", p.indexing().display(i), label(i));
            v.insert("chosen", shown(d.answer));
            v.insert(
                "utilities",
                lines(
                    d.utilities
                        .iter()
                        .enumerate()
                        .map(|(i, u)| format!("{}: {u:.4}", shown(i))),
                ),
            );
            v.insert(
                "influential",
                if d.influential.is_empty() {
                    "- none (every contribution is zero)".to_string()
                } else {
                    lines(d.influential.iter().map(|(a, c)| format!("{a}: {c:.4}")))
                },
            );
            v.insert(
                "runner_up",
                match d.runner_up {
                    Some(r) => format!("{} with utility {:.4}", shown(r), d.utilities[r]),
                    None => "none (no other feasible choice)".to_string(),
                },
            );
        }
        v
    }
}

fn lines(items: impl Iterator<Item = String>) -> String {
    items.map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}

fn choices(p: &DecisionProblem) -> String {
    p.actions()
        .iter()
        .enumerate()
        .map(|(i, a)| format!("({}) {a}", p.indexing().display(i)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn constraints(p: &DecisionProblem) -> String {
    let mut out: Vec<String> = p
        .constraints()
        .iter()
        .map(|c| c.source_text.clone())
        .collect();
    out.push("exactly one choice is selected".to_string());
    lines(out.into_iter())
}

/// Deterministic prompt text for `id` over `context`.
pub fn render_stage_prompt(
    templates: &TemplateSet,
    id: TemplateId,
    context: &PromptContext<'_>,
) -> Result<String, TemplateError> {
    templates.render(id, &context.values())
}
