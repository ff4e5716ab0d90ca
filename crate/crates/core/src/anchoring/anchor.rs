use serde::{Deserialize, Serialize};

use crate::model::{normalize_explanation_text, ExpressionExplanation, Span};

/// A segment as returned by a provider, before it has columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawSegment {
    pub segment_text: String,
    pub explanation: String,
}

impl RawSegment {
    pub fn new(segment_text: impl Into<String>, explanation: impl Into<String>) -> Self {
        RawSegment {
            segment_text: segment_text.into(),
            explanation: explanation.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStage {
    Exact,
    Trimmed,
    WhitespaceInsensitive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedSegment {
    pub segment_text: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnchorOutcome {
    pub items: Vec<ExpressionExplanation>,
    pub stages: Vec<MatchStage>,
    pub dropped: Vec<DroppedSegment>,
}

pub fn anchor_segments(
    line_index: usize,
    line: &str,
    segs: &[RawSegment],
) -> Vec<ExpressionExplanation> {
    anchor_segments_detailed(line_index, line, segs).items
}

/// Greedy left-to-right anchoring: each segment takes the leftmost match
/// starting at or after the end of the previously anchored segment.
pub fn anchor_segments_detailed(
    line_index: usize,
    line: &str,
    segs: &[RawSegment],
) -> AnchorOutcome {
    let chars: Vec<char> = line.chars().collect();
    let mut out = AnchorOutcome::default();
    let mut cursor = 0;
    for seg in segs {
        if seg.segment_text.trim().is_empty() {
            out.dropped.push(DroppedSegment {
                segment_text: seg.segment_text.clone(),
                reason: "blank segment",
            });
            continue;
        }
        let Ok(text) = normalize_explanation_text(&seg.explanation) else {
            out.dropped.push(DroppedSegment {
                segment_text: seg.segment_text.clone(),
                reason: "empty explanation",
            });
            continue;
        };
        let Some((start, end, stage)) = locate(&chars, &seg.segment_text, cursor) else {
            out.dropped.push(DroppedSegment {
                segment_text: seg.segment_text.clone(),
                reason: "not found in line",
            });
            continue;
        };
        out.items.push(ExpressionExplanation {
            span: Span::new(line_index, start, end),
            text,
            ordinal: out.items.len(),
        });
        out.stages.push(stage);
        cursor = end;
    }
    out
}

fn locate(chars: &[char], segment: &str, from: usize) -> Option<(usize, usize, MatchStage)> {
    let exact: Vec<char> = segment.chars().collect();
    if let Some(s) = find_exact(chars, &exact, from) {
        return Some((s, s + exact.len(), MatchStage::Exact));
    }
    let trimmed: Vec<char> = segment.trim().chars().collect();
    if trimmed.len() != exact.len() {
        if let Some(s) = find_exact(chars, &trimmed, from) {
            return Some((s, s + trimmed.len(), MatchStage::Trimmed));
        }
    }
    let squeezed: Vec<char> = segment.chars().filter(|c| !c.is_whitespace()).collect();
    find_ignoring_whitespace(chars, &squeezed, from)
        .map(|(s, e)| (s, e, MatchStage::WhitespaceInsensitive))
}

fn find_exact(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&s| hay[s..s + needle.len()] == *needle)
}

/// Matches `needle` (whitespace already removed) against `hay`, letting any
/// whitespace in `hay` sit between needle characters.
fn find_ignoring_whitespace(hay: &[char], needle: &[char], from: usize) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    'start: for s in from..hay.len() {
        if hay[s] != needle[0] {
            continue;
        }
        let mut h = s + 1;
        for &c in &needle[1..] {
            while h < hay.len() && hay[h].is_whitespace() {
                h += 1;
            }
            if h >= hay.len() || hay[h] != c {
                continue 'start;
            }
            h += 1;
        }
        return Some((s, h));
    }
    None
}
