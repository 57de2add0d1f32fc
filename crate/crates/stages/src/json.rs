//! Locating and minimally repairing the JSON object inside a completion.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::StageError;

/// The syntactic repairs we are willing to make. Nothing else is guessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repair {
    SingleQuotes,
    UnquotedKeys,
    TrailingCommas,
}

impl fmt::Display for Repair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SingleQuotes => "converted single-quoted strings to double quotes",
            Self::UnquotedKeys => "quoted bare object keys",
            Self::TrailingCommas => "removed trailing commas",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonBlock {
    /// Canonical serialization of `value` (sorted keys, compact).
    pub text: String,
    pub value: Value,
    pub repairs: Vec<Repair>,
}

/// Returns the first JSON object in `text` that parses, trying fenced blocks
/// before the surrounding prose.
pub fn extract_json_block(text: &str) -> Result<JsonBlock, StageError> {
    let mut last_error = None;
    let mut saw_brace = false;
    for region in regions(text) {
        let bytes = region.as_bytes();
        for (start, &b) in bytes.iter().enumerate() {
            if b != b'{' {
                continue;
            }
            saw_brace = true;
            let Some(end) = balanced_end(region, start) else {
                continue;
            };
            match parse_candidate(&region[start..=end]) {
                Ok(block) => return Ok(block),
                Err(e) => {
                    last_error.get_or_insert(e);
                }
            }
        }
    }
    let message = match (saw_brace, last_error) {
        (_, Some(e)) => format!("malformed object: {e}"),
        (true, None) => "unbalanced object".to_string(),
        (false, None) => "no object present".to_string(),
    };
    Err(StageError::Parse {
        message,
        raw: text.to_string(),
    })
}

fn parse_candidate(candidate: &str) -> Result<JsonBlock, String> {
    if let Ok(value @ Value::Object(_)) = serde_json::from_str::<Value>(candidate) {
        return Ok(block(value, Vec::new()));
    }
    let mut repairs = Vec::new();
    let mut current = candidate.to_string();
    let passes: [(Repair, fn(&str) -> String); 3] = [
        (Repair::SingleQuotes, fix_single_quotes),
        (Repair::UnquotedKeys, quote_keys),
        (Repair::TrailingCommas, drop_trailing_commas),
    ];
    for (repair, pass) in passes {
        let next = pass(&current);
        if next != current {
            repairs.push(repair);
            current = next;
        }
    }
    match serde_json::from_str::<Value>(&current) {
        Ok(value @ Value::Object(_)) => Ok(block(value, repairs)),
        Ok(_) => Err("not an object".to_string()),
        Err(e) => Err(e.to_string()),
    }
}

fn block(value: Value, repairs: Vec<Repair>) -> JsonBlock {
    let text = serde_json::to_string(&value).expect("a parsed value serializes");
    JsonBlock {
        text,
        value,
        repairs,
    }
}

/// Contents of code fences in order, then the whole text.
fn regions(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let Some(close) = after[body_start..].find("```") else {
            break;
        };
        out.push(&after[body_start..body_start + close]);
        rest = &after[body_start + close + 3..];
    }
    out.push(text);
    out
}

fn opens_string(prev: Option<char>) -> bool {
    matches!(prev, Some('{' | '[' | ',' | ':'))
}

/// Index of the `}` closing the object opened at `start`.
fn balanced_end(s: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut prev = None;
    for (i, c) in s[start..].char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
        } else {
            match c {
                '"' => quote = Some('"'),
                '\'' if opens_string(prev) => quote = Some('\''),
                '{' | '[' => depth += 1,
                '}' | ']' => {
                    depth = depth.checked_sub(1)?;
                    if depth == 0 {
                        return (c == '}').then_some(start + i);
                    }
                }
                _ => {}
            }
        }
        if !c.is_whitespace() {
            prev = Some(c);
        }
    }
    None
}

fn fix_single_quotes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    let mut prev = None;
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                out.push(c);
                copy_double_quoted(&mut chars, &mut out);
            }
            '\'' if opens_string(prev) => {
                out.push('"');
                while let Some(d) = chars.next() {
                    match d {
                        '\\' => match chars.next() {
                            Some('\'') => out.push('\''),
                            Some(e) => {
                                out.push('\\');
                                out.push(e);
                            }
                            None => out.push('\\'),
                        },
                        '"' => out.push_str("\\\""),
                        '\'' => break,
                        _ => out.push(d),
                    }
                }
                out.push('"');
            }
            _ => out.push(c),
        }
        if !c.is_whitespace() {
            prev = Some(c);
        }
    }
    out
}

fn copy_double_quoted(chars: &mut std::iter::Peekable<std::str::Chars<'_>>, out: &mut String) {
    while let Some(d) = chars.next() {
        out.push(d);
        match d {
            '\\' => {
                if let Some(e) = chars.next() {
                    out.push(e);
                }
            }
            '"' => return,
            _ => {}
        }
    }
}

fn quote_keys(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 8);
    let mut i = 0;
    let mut in_string = false;
    while i < chars.len() {
        let c = chars[i];
        out.push(c);
        i += 1;
        if in_string {
            if c == '\\' {
                if let Some(&e) = chars.get(i) {
                    out.push(e);
                    i += 1;
                }
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | ',' => {
                let mut j = i;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                let ident_start = j;
                if j < chars.len() && (chars[j].is_alphabetic() || chars[j] == '_') {
                    while j < chars.len()
                        && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '-')
                    {
                        j += 1;
                    }
                    let ident_end = j;
                    while j < chars.len() && chars[j].is_whitespace() {
                        j += 1;
                    }
                    if chars.get(j) == Some(&':') {
                        out.extend(&chars[i..ident_start]);
                        out.push('"');
                        out.extend(&chars[ident_start..ident_end]);
                        out.push('"');
                        i = ident_end;
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn drop_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        i += 1;
        if in_string {
            out.push(c);
            if c == '\\' {
                if let Some(&e) = chars.get(i) {
                    out.push(e);
                    i += 1;
                }
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c == ',' {
            let next = chars[i..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}' | ']')) {
                continue;
            }
        }
        if c == '"' {
            in_string = true;
        }
        out.push(c);
    }
    out
}
