//! Per-line work over whole documents, run through [`ExecMode`].

use crate::anchoring::{anchor_segments, validate_expressions, ValidationReport};
use crate::exec::{map_items, ExecMode};
use crate::layout::{line_labels, GridMetrics, LabelBox};
use crate::model::{ExplanationSet, ExpressionExplanation, Suggestion};
use crate::pipeline::mock_segment_line;

/// Expression labels for every line at absolute rows, as if each line were
/// hovered in turn.
pub fn layout_all_lines(
    s: &Suggestion,
    set: &ExplanationSet,
    metrics: &GridMetrics,
    mode: ExecMode,
) -> Vec<Vec<LabelBox>> {
    map_items(mode, &s.lines, |i, _| line_labels(s, set, i, metrics))
}

pub fn validate_all_lines(
    s: &Suggestion,
    set: &ExplanationSet,
    mode: ExecMode,
) -> Vec<ValidationReport> {
    map_items(mode, &s.lines, |i, line| {
        validate_expressions(line, set.expressions(i), None)
    })
}

/// Rule-based segmentation and anchoring of every line without going
/// through a provider. Blank lines yield no items.
pub fn mock_explain_lines(lines: &[String], mode: ExecMode) -> Vec<Vec<ExpressionExplanation>> {
    map_items(mode, lines, |i, line| match mock_segment_line(line) {
        Ok(segs) => anchor_segments(i, line, &segs),
        Err(_) => Vec::new(),
    })
}
