//! Shared domain types and the small normalization operations built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Maximum number of document lines above a suggestion that are forwarded
/// to prompts.
pub const MAX_PRECEDING_CONTEXT: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("explanation text is empty after normalization")]
    EmptyExplanation,
    #[error("suggestion has no lines")]
    EmptySuggestion,
    #[error("suggestion line {0} contains a line terminator")]
    LineTerminator(usize),
}

/// A ghost-text event: the suggested lines plus where they appear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Suggestion {
    pub suggestion_id: String,
    pub doc_id: String,
    #[serde(default)]
    pub doc_content_hash: String,
    #[serde(default)]
    pub anchor_line: usize,
    pub lines: Vec<String>,
    #[serde(default)]
    pub preceding_context: Vec<String>,
}

impl Suggestion {
    /// Builds a suggestion, trimming `preceding_context` to its last
    /// [`MAX_PRECEDING_CONTEXT`] lines.
    pub fn new(
        suggestion_id: impl Into<String>,
        doc_id: impl Into<String>,
        anchor_line: usize,
        lines: Vec<String>,
        preceding_context: Vec<String>,
    ) -> Result<Self, ModelError> {
        let mut s = Suggestion {
            suggestion_id: suggestion_id.into(),
            doc_id: doc_id.into(),
            doc_content_hash: String::new(),
            anchor_line,
            lines,
            preceding_context,
        };
        s.cap_context();
        s.validate()?;
        Ok(s)
    }

    /// Treats a whole buffer as one suggestion anchored at line 0.
    pub fn whole_file(doc_id: impl Into<String>, lines: Vec<String>) -> Result<Self, ModelError> {
        let doc_id = doc_id.into();
        let hash = content_hash(&lines);
        let mut s = Suggestion::new(
            format!("file:{doc_id}:{hash}"),
            doc_id,
            0,
            lines,
            Vec::new(),
        )?;
        s.doc_content_hash = hash;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.lines.is_empty() {
            return Err(ModelError::EmptySuggestion);
        }
        if let Some(i) = self.lines.iter().position(|l| l.contains(['\n', '\r'])) {
            return Err(ModelError::LineTerminator(i));
        }
        Ok(())
    }

    pub(crate) fn cap_context(&mut self) {
        let n = self.preceding_context.len();
        if n > MAX_PRECEDING_CONTEXT {
            self.preceding_context.drain(..n - MAX_PRECEDING_CONTEXT);
        }
    }

    pub fn kind(&self) -> SuggestionKind {
        suggestion_kind(self)
    }

    /// Length of every line in columns (Unicode scalar values).
    pub fn line_lengths(&self) -> Vec<usize> {
        self.lines.iter().map(|l| char_len(l)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuggestionKind {
    SingleLine,
    MultiLine,
}

pub fn suggestion_kind(s: &Suggestion) -> SuggestionKind {
    if s.lines.len() == 1 {
        SuggestionKind::SingleLine
    } else {
        SuggestionKind::MultiLine
    }
}

/// Column range on one suggestion line. Columns count Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Span {
    pub line: usize,
    pub col_start: usize,
    pub col_end: usize,
}

impl Span {
    pub fn new(line: usize, col_start: usize, col_end: usize) -> Self {
        Span {
            line,
            col_start,
            col_end,
        }
    }

    pub fn len(&self) -> usize {
        self.col_end - self.col_start
    }

    pub fn is_empty(&self) -> bool {
        self.col_end <= self.col_start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.line == other.line && self.col_start < other.col_end && other.col_start < self.col_end
    }

    /// The column midway through the span, rounded down.
    pub fn midpoint(&self) -> usize {
        self.col_start + (self.col_end - self.col_start) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpressionExplanation {
    pub span: Span,
    pub text: String,
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockExplanation {
    pub start_line: usize,
    pub end_line: usize,
    pub text: String,
}

impl BlockExplanation {
    pub fn new(start_line: usize, end_line: usize, text: impl Into<String>) -> Self {
        BlockExplanation {
            start_line,
            end_line,
            text: text.into(),
        }
    }

    pub fn covers(&self, line: usize) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

/// Which explanation kinds a request asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Expressions,
    Blocks,
    #[default]
    Both,
}

impl Granularity {
    pub fn expressions(self) -> bool {
        matches!(self, Granularity::Expressions | Granularity::Both)
    }

    pub fn blocks(self) -> bool {
        matches!(self, Granularity::Blocks | Granularity::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetStatus {
    Pending,
    Partial,
    Complete,
    Failed,
}

/// The evolving collection of explanations for one suggestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExplanationSet {
    pub suggestion_id: String,
    pub status: SetStatus,
    #[serde(default)]
    pub granularity: Granularity,
    pub expressions_by_line: BTreeMap<usize, Vec<ExpressionExplanation>>,
    pub blocks: Vec<BlockExplanation>,
    /// Set when the block request finished and validation left nothing.
    #[serde(default)]
    pub blocks_settled: bool,
    /// Lines whose expression request failed.
    #[serde(default)]
    pub failed_lines: Vec<usize>,
    #[serde(default)]
    pub block_failed: bool,
}

impl ExplanationSet {
    pub fn new(suggestion_id: impl Into<String>) -> Self {
        ExplanationSet {
            suggestion_id: suggestion_id.into(),
            status: SetStatus::Pending,
            granularity: Granularity::Both,
            expressions_by_line: BTreeMap::new(),
            blocks: Vec::new(),
            blocks_settled: false,
            failed_lines: Vec::new(),
            block_failed: false,
        }
    }

    pub fn with_granularity(mut self, granularity: Granularity) -> Self {
        self.granularity = granularity;
        self
    }

    pub fn expressions(&self, line: usize) -> &[ExpressionExplanation] {
        self.expressions_by_line
            .get(&line)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ProviderConfig {
    pub provider_kind: ProviderKind,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stream: bool,
    pub endpoint_url: String,
    pub api_key_env_var: String,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            provider_kind: ProviderKind::Mock,
            model_id: "text-davinci-003".to_string(),
            temperature: 0.5,
            max_tokens: 1000,
            stream: true,
            endpoint_url: "https://api.openai.com/v1/completions".to_string(),
            api_key_env_var: "IVIE_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("temperature {0} outside [0, 2]")]
    Temperature(String),
    #[error("max tokens must be at least 1")]
    MaxTokens,
    #[error("remote provider requires an endpoint url")]
    MissingEndpoint,
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature.to_string()));
        }
        if self.max_tokens < 1 {
            return Err(ConfigError::MaxTokens);
        }
        if self.provider_kind == ProviderKind::Remote && self.endpoint_url.trim().is_empty() {
            return Err(ConfigError::MissingEndpoint);
        }
        Ok(())
    }
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by column range.
pub fn slice_cols(s: &str, start: usize, end: usize) -> String {
    s.chars()
        .skip(start)
        .take(end.saturating_sub(start))
        .collect()
}

/// Hex SHA-256 of the lines joined with `\n`.
pub fn content_hash(lines: &[String]) -> String {
    let mut hasher = Sha256::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(line.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Collapses whitespace and keeps at most the first two sentences.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace or the end of
/// the text.
pub fn normalize_explanation_text(raw: &str) -> Result<String, ModelError> {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    let mut sentences = 0;
    let mut cut = chars.len();
    for (i, c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| *n == ' ') {
            sentences += 1;
            if sentences == 2 {
                cut = i + 1;
                break;
            }
        }
    }
    let text: String = chars[..cut].iter().collect();
    if text.is_empty() {
        Err(ModelError::EmptyExplanation)
    } else {
        Ok(text)
    }
}

/// Counts sentence terminators the same way [`normalize_explanation_text`] does.
pub fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    chars
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace())
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsistencyError {
    #[error("set {set} does not belong to suggestion {suggestion}")]
    WrongSuggestion { set: String, suggestion: String },
    #[error("line {0} out of range")]
    LineOutOfRange(usize),
    #[error("span {0:?} invalid for its line")]
    BadSpan(Span),
    #[error("span {0:?} recorded under line {1}")]
    MisfiledSpan(Span, usize),
    #[error("spans on line {0} overlap or are out of order")]
    Unordered(usize),
    #[error("ordinal {found} at position {expected} on line {line}")]
    Ordinal {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("explanation text on line {0} is empty or unnormalized")]
    BadText(usize),
    #[error("block {0}-{1} invalid")]
    BadBlock(usize, usize),
    #[error("blocks overlap or are out of order")]
    BlocksUnordered,
    #[error("complete set missing entry for line {0}")]
    MissingLine(usize),
    #[error("complete multi-line set has no settled blocks")]
    BlocksUnsettled,
}

/// Checks every structural invariant of `set` against `s` in one pass.
pub fn check_consistency(s: &Suggestion, set: &ExplanationSet) -> Result<(), ConsistencyError> {
    if set.suggestion_id != s.suggestion_id {
        return Err(ConsistencyError::WrongSuggestion {
            set: set.suggestion_id.clone(),
            suggestion: s.suggestion_id.clone(),
        });
    }
    let lengths = s.line_lengths();
    for (&line, items) in &set.expressions_by_line {
        let len = *lengths
            .get(line)
            .ok_or(ConsistencyError::LineOutOfRange(line))?;
        let mut prev_end = 0;
        for (i, item) in items.iter().enumerate() {
            let sp = item.span;
            if sp.line != line {
                return Err(ConsistencyError::MisfiledSpan(sp, line));
            }
            if sp.col_start >= sp.col_end || sp.col_end > len {
                return Err(ConsistencyError::BadSpan(sp));
            }
            if i > 0 && sp.col_start < prev_end {
                return Err(ConsistencyError::Unordered(line));
            }
            prev_end = sp.col_end;
            if item.ordinal != i {
                return Err(ConsistencyError::Ordinal {
                    line,
                    expected: i,
                    found: item.ordinal,
                });
            }
            match normalize_explanation_text(&item.text) {
                Ok(n) if n == item.text => {}
                _ => return Err(ConsistencyError::BadText(line)),
            }
        }
    }
    let mut next_free = 0;
    for (i, b) in set.blocks.iter().enumerate() {
        if b.start_line > b.end_line || b.end_line >= s.lines.len() {
            return Err(ConsistencyError::BadBlock(b.start_line, b.end_line));
        }
        if i > 0 && b.start_line < next_free {
            return Err(ConsistencyError::BlocksUnordered);
        }
        next_free = b.end_line + 1;
        if b.text.trim().is_empty() {
            return Err(ConsistencyError::BadBlock(b.start_line, b.end_line));
        }
    }
    if set.status == SetStatus::Complete && set.granularity.expressions() {
        for line in 0..s.lines.len() {
            if !set.expressions_by_line.contains_key(&line) {
                return Err(ConsistencyError::MissingLine(line));
            }
        }
    }
    if set.status == SetStatus::Complete
        && set.granularity.blocks()
        && s.kind() == SuggestionKind::MultiLine
        && set.blocks.is_empty()
        && !set.blocks_settled
    {
        return Err(ConsistencyError::BlocksUnsettled);
    }
    Ok(())
}
