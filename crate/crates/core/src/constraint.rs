//! Constraint expressions over the one-hot action variables `x1..xn`.
//!
//! Recognized forms, with 1-based variable names mapped to 0-based actions:
//!
//! * `x1 + x2 <= 1`: cardinality limit over a set of actions
//! * `x2 = 0` (or `==`): exclusion of a single action
//! * `x1, x2 in {0,1}`: binary domain marker
//!
//! Anything else is kept verbatim as an opaque constraint. Opaque text is
//! shown to the model in prompts but never restricts feasibility.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    Cardinality { limit: u64, over: BTreeSet<usize> },
    Exclusion { action: usize },
    BinaryDomain,
    Opaque,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(flatten)]
    pub kind: ConstraintKind,
    pub source_text: String,
}

impl Constraint {
    pub fn exclusion(action: usize) -> Self {
        Self {
            kind: ConstraintKind::Exclusion { action },
            source_text: format!("x{} = 0", action + 1),
        }
    }

    /// Action indices this constraint refers to.
    pub fn referenced_actions(&self) -> Vec<usize> {
        match &self.kind {
            ConstraintKind::Cardinality { over, .. } => over.iter().copied().collect(),
            ConstraintKind::Exclusion { action } => vec![*action],
            ConstraintKind::BinaryDomain | ConstraintKind::Opaque => Vec::new(),
        }
    }

    /// True when the constraint removes at least one action from the
    /// feasible set under exactly-one selection.
    pub fn is_restrictive(&self) -> bool {
        matches!(
            &self.kind,
            ConstraintKind::Exclusion { .. } | ConstraintKind::Cardinality { limit: 0, .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Var(usize),
    Int(u64),
    Plus,
    Le,
    Eq,
    Comma,
    In,
    LBrace,
    RBrace,
}

fn tokenize(text: &str) -> Option<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '{' => {
                tokens.push(Token::LBrace);
                i += 1;
            }
            '}' => {
                tokens.push(Token::RBrace);
                i += 1;
            }
            '≤' => {
                tokens.push(Token::Le);
                i += 1;
            }
            '∈' => {
                tokens.push(Token::In);
                i += 1;
            }
            '<' if chars.get(i + 1) == Some(&'=') => {
                tokens.push(Token::Le);
                i += 2;
            }
            '=' => {
                tokens.push(Token::Eq);
                i += if chars.get(i + 1) == Some(&'=') { 2 } else { 1 };
            }
            'x' | 'X' if chars.get(i + 1).is_some_and(char::is_ascii_digit) => {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && chars[end].is_ascii_digit() {
                    end += 1;
                }
                let digits: String = chars[start..end].iter().collect();
                tokens.push(Token::Var(digits.parse().ok()?));
                i = end;
            }
            'i' if chars.get(i + 1) == Some(&'n')
                && chars.get(i + 2).is_none_or(|c| !c.is_alphanumeric()) =>
            {
                tokens.push(Token::In);
                i += 2;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                tokens.push(Token::Int(digits.parse().ok()?));
            }
            _ => return None,
        }
    }
    Some(tokens)
}

/// Parses `x<i> (+ x<j>)* <= <int>` into a cardinality constraint.
fn parse_cardinality(tokens: &[Token]) -> Option<ConstraintKind> {
    let (rhs, lhs) = tokens.split_last()?;
    let Token::Int(limit) = rhs else { return None };
    let (le, vars) = lhs.split_last()?;
    if *le != Token::Le || vars.is_empty() {
        return None;
    }
    let mut over = BTreeSet::new();
    for (k, token) in vars.iter().enumerate() {
        match (k % 2, token) {
            (0, Token::Var(v)) if *v >= 1 => {
                // repeated variables would carry coefficient 2
                if !over.insert(v - 1) {
                    return None;
                }
            }
            (1, Token::Plus) => {}
            _ => return None,
        }
    }
    if vars.len() % 2 == 0 {
        return None;
    }
    Some(ConstraintKind::Cardinality {
        limit: *limit,
        over,
    })
}

fn parse_exclusion(tokens: &[Token]) -> Option<ConstraintKind> {
    match tokens {
        [Token::Var(v), Token::Eq, Token::Int(0)] if *v >= 1 => {
            Some(ConstraintKind::Exclusion { action: v - 1 })
        }
        _ => None,
    }
}

/// Parses `x1, x2 in {0,1}`.
fn parse_domain(tokens: &[Token]) -> Option<ConstraintKind> {
    let in_pos = tokens.iter().position(|t| *t == Token::In)?;
    let (vars, domain) = tokens.split_at(in_pos);
    if domain
        != [
            Token::In,
            Token::LBrace,
            Token::Int(0),
            Token::Comma,
            Token::Int(1),
            Token::RBrace,
        ]
    {
        return None;
    }
    if vars.is_empty() || vars.len() % 2 == 0 {
        return None;
    }
    let well_formed = vars.iter().enumerate().all(|(k, t)| match (k % 2, t) {
        (0, Token::Var(v)) => *v >= 1,
        (1, Token::Comma) => true,
        _ => false,
    });
    well_formed.then_some(ConstraintKind::BinaryDomain)
}

/// Total: unrecognized text becomes [`ConstraintKind::Opaque`].
pub fn parse_constraint(text: &str) -> Constraint {
    let trimmed = text.trim();
    let kind = tokenize(trimmed)
        .and_then(|tokens| {
            parse_cardinality(&tokens)
                .or_else(|| parse_exclusion(&tokens))
                .or_else(|| parse_domain(&tokens))
        })
        .unwrap_or(ConstraintKind::Opaque);
    Constraint {
        kind,
        source_text: trimmed.to_string(),
    }
}

/// Actions that survive the constraints under exactly-one selection.
///
/// A cardinality limit of 0 excludes its whole set; limits of 1 or more are
/// implied by exactly-one selection and ignored. Indices `>= n` are ignored.
pub fn feasible_actions(constraints: &[Constraint], n: usize) -> BTreeSet<usize> {
    let mut feasible: BTreeSet<usize> = (0..n).collect();
    for constraint in constraints {
        match &constraint.kind {
            ConstraintKind::Exclusion { action } => {
                feasible.remove(action);
            }
            ConstraintKind::Cardinality { limit: 0, over } => {
                for i in over {
                    feasible.remove(i);
                }
            }
            ConstraintKind::Cardinality { .. }
            | ConstraintKind::BinaryDomain
            | ConstraintKind::Opaque => {}
        }
    }
    feasible
}
