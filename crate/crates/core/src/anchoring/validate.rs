//! Mechanical checks of anchored expressions: completeness, token-accurate
//! bounds and clean segmentation.

use serde::{Deserialize, Serialize};

use super::lexer::{analyze_line, is_ident_char, PartKind};
use crate::model::ExpressionExplanation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Violation,
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Criterion {
    Complete,
    AccurateBounds,
    ProperSegmentation,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub severity: Severity,
    pub criterion: Criterion,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub complete: bool,
    pub accurate_bounds: bool,
    pub proper_segmentation: bool,
    pub notes: Vec<Note>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.complete && self.accurate_bounds && self.proper_segmentation
    }

    pub fn violations(&self) -> impl Iterator<Item = &Note> {
        self.notes
            .iter()
            .filter(|n| n.severity == Severity::Violation)
    }
}

/// Identifier or numeric-literal character for boundary purposes.
fn is_token_char(c: char) -> bool {
    is_ident_char(c) || c == '.'
}

pub fn validate_expressions(
    line: &str,
    items: &[ExpressionExplanation],
    expected_call_arity: Option<usize>,
) -> ValidationReport {
    let chars: Vec<char> = line.chars().collect();
    let structure = analyze_line(line);
    let mut notes = Vec::new();
    let mut violation = |criterion, message: String| {
        notes.push(Note {
            severity: Severity::Violation,
            criterion,
            message,
        });
    };

    let covered = |start: usize, end: usize| {
        items
            .iter()
            .any(|it| it.span.col_start < end && start < it.span.col_end)
    };
    for part in &structure.parts {
        if !covered(part.col_start, part.col_end) {
            let what = match part.kind {
                PartKind::Callee => "callee",
                PartKind::Arg => "argument",
                PartKind::Lhs => "assignment target",
                PartKind::Rhs => "assigned value",
                PartKind::Whole => "expression",
            };
            violation(
                Criterion::Complete,
                format!("{what} `{}` has no explanation", part.text),
            );
        }
    }
    if let (Some(expected), Some(found)) = (expected_call_arity, structure.call_arity()) {
        if expected != found {
            violation(
                Criterion::Complete,
                format!("expected {expected} call arguments, line has {found}"),
            );
        }
    } else if let Some(expected) = expected_call_arity {
        if !structure.is_call() && expected > 0 {
            violation(
                Criterion::Complete,
                "expected a call but line is not one".to_string(),
            );
        }
    }

    for it in items {
        let (s, e) = (it.span.col_start, it.span.col_end);
        if s >= e || e > chars.len() {
            violation(
                Criterion::AccurateBounds,
                format!("span [{s},{e}) outside line"),
            );
            continue;
        }
        if s > 0 && is_token_char(chars[s - 1]) && is_token_char(chars[s]) {
            violation(
                Criterion::AccurateBounds,
                format!("span [{s},{e}) begins inside a token"),
            );
        }
        if e < chars.len() && is_token_char(chars[e - 1]) && is_token_char(chars[e]) {
            violation(
                Criterion::AccurateBounds,
                format!("span [{s},{e}) ends inside a token"),
            );
        }
    }

    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            if a.span.overlaps(&b.span) {
                violation(
                    Criterion::ProperSegmentation,
                    format!(
                        "spans [{},{}) and [{},{}) overlap",
                        a.span.col_start, a.span.col_end, b.span.col_start, b.span.col_end
                    ),
                );
            }
        }
        if let Some(d) = structure
            .delimiters
            .iter()
            .find(|&&d| a.span.col_start <= d && d < a.span.col_end)
        {
            violation(
                Criterion::ProperSegmentation,
                format!(
                    "span [{},{}) includes delimiter `{}` at column {d}",
                    a.span.col_start, a.span.col_end, chars[*d]
                ),
            );
        }
    }

    notes.push(Note {
        severity: Severity::Info,
        criterion: Criterion::Accuracy,
        message: "explanation accuracy not evaluated".to_string(),
    });
    let flag = |c: Criterion| {
        !notes
            .iter()
            .any(|n| n.severity == Severity::Violation && n.criterion == c)
    };
    ValidationReport {
        complete: flag(Criterion::Complete),
        accurate_bounds: flag(Criterion::AccurateBounds),
        proper_segmentation: flag(Criterion::ProperSegmentation),
        notes,
    }
}
