//! Deterministic rule-based stand-in for the language model.

use serde_json::json;

use super::cancel::CancelToken;
use super::prompt::{PromptError, PromptKind};
use super::provider::{CompletionRequest, Provider, ProviderError};
use crate::anchoring::{analyze_line, PartKind, RawSegment};
use crate::model::BlockExplanation;

/// Segments a line with the depth-aware splitter and explains each part
/// from a template.
pub fn mock_segment_line(line: &str) -> Result<Vec<RawSegment>, PromptError> {
    if line.trim().is_empty() {
        return Err(PromptError::BlankLine);
    }
    let structure = analyze_line(line);
    let callee = structure.callee().map(|p| p.text.clone());
    let lhs = structure
        .parts
        .iter()
        .find(|p| p.kind == PartKind::Lhs)
        .map(|p| p.text.clone());
    let mut arg_no = 0;
    Ok(structure
        .parts
        .iter()
        .map(|p| {
            let explanation = match p.kind {
                PartKind::Callee => format!("Function being called: {}.", p.text),
                PartKind::Arg => {
                    arg_no += 1;
                    format!(
                        "Argument {arg_no} of {}: {}.",
                        callee.as_deref().unwrap_or("the call"),
                        p.text
                    )
                }
                PartKind::Lhs => format!("Assignment target: {}.", p.text),
                PartKind::Rhs => format!(
                    "Value assigned to {}: {}.",
                    lhs.as_deref().unwrap_or("the target"),
                    p.text
                ),
                PartKind::Whole => format!("Evaluates {}.", p.text),
            };
            RawSegment::new(p.text.clone(), explanation)
        })
        .collect())
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn is_indented(line: &str) -> bool {
    line.starts_with(char::is_whitespace)
}

/// Groups lines into steps, splitting at blank lines and at dedents back to
/// column 0.
pub fn mock_block_segments(lines: &[String]) -> Result<Vec<BlockExplanation>, PromptError> {
    if lines.len() < 2 {
        return Err(PromptError::TooShort(lines.len()));
    }
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut prev_indented = false;
    for (i, line) in lines.iter().enumerate() {
        if is_blank(line) {
            groups.extend(open.take());
            continue;
        }
        let indented = is_indented(line);
        if open.is_some() && !indented && prev_indented {
            groups.extend(open.take());
        }
        open = Some((open.map_or(i, |(s, _)| s), i));
        prev_indented = indented;
    }
    groups.extend(open);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| BlockExplanation::new(a, b, format!("Step {}: lines {a}–{b}.", k + 1)))
        .collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MockProvider;

impl Provider for MockProvider {
    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<String, ProviderError> {
        if cancel.is_cancelled() {
            return Err(ProviderError::Cancelled);
        }
        let prompt = &request.prompt;
        let invalid = |e: PromptError| ProviderError::Malformed(e.to_string());
        let objects: Vec<serde_json::Value> = match prompt.kind {
            PromptKind::ExpressionLevel => {
                let line = prompt.code.first().map(String::as_str).unwrap_or("");
                mock_segment_line(line)
                    .map_err(invalid)?
                    .into_iter()
                    .map(|s| json!({"segment": s.segment_text, "explanation": s.explanation}))
                    .collect()
            }
            PromptKind::BlockLevel => mock_block_segments(&prompt.code)
                .map_err(invalid)?
                .into_iter()
                .map(|b| json!({"startLine": b.start_line, "endLine": b.end_line, "explanation": b.text}))
                .collect(),
        };
        let mut full = String::from("[");
        if request.stream {
            on_chunk("[");
        }
        for (i, obj) in objects.iter().enumerate() {
            let piece = format!("{}{}", if i > 0 { ", " } else { "" }, obj);
            if request.stream {
                on_chunk(&piece);
            }
            full.push_str(&piece);
        }
        full.push(']');
        if request.stream {
            on_chunk("]");
        }
        Ok(full)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
