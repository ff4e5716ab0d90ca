//! Overlay geometry on a monospace grid.
//!
//! Expression labels sit beneath their code line, left-aligned with their
//! expression, and are pushed rightward past the previous label when they
//! would collide. A label that still collides with an earlier box drops to
//! the tier below it. Labels far from their expression (less than half of
//! the label overlapping it horizontally) get a leader line. Block labels
//! share one margin column to the right of the code, capped at column 80.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    char_len, BlockExplanation, ExplanationSet, ExpressionExplanation, Suggestion, SuggestionKind,
};

/// Colors shared by a label border and its expression underline.
pub const PALETTE_SIZE: usize = 6;
/// Block labels never start further right than this column (plus the gap).
pub const MARGIN_CAP_COL: usize = 80;
/// Narrowest wrap width used for margin labels.
const MIN_MARGIN_WRAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GridMetrics {
    pub viewport_cols: usize,
    pub label_max_width_cols: usize,
    pub label_padding_cols: usize,
    pub margin_gap_cols: usize,
}

impl Default for GridMetrics {
    fn default() -> Self {
        GridMetrics {
            viewport_cols: 120,
            label_max_width_cols: 40,
            label_padding_cols: 1,
            margin_gap_cols: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("viewport must be at least 40 columns, got {0}")]
    ViewportTooNarrow(usize),
    #[error("label width {0} exceeds viewport {1}")]
    LabelWiderThanViewport(usize, usize),
    #[error("label width {0} leaves no room for text with padding {1}")]
    NoTextRoom(usize, usize),
    #[error("explanation set {set} is stale for suggestion {suggestion}")]
    StaleSet { set: String, suggestion: String },
}

impl GridMetrics {
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.viewport_cols < 40 {
            return Err(LayoutError::ViewportTooNarrow(self.viewport_cols));
        }
        if self.label_max_width_cols > self.viewport_cols {
            return Err(LayoutError::LabelWiderThanViewport(
                self.label_max_width_cols,
                self.viewport_cols,
            ));
        }
        if self.label_max_width_cols <= 2 * self.label_padding_cols {
            return Err(LayoutError::NoTextRoom(
                self.label_max_width_cols,
                self.label_padding_cols,
            ));
        }
        Ok(())
    }

    /// Columns available for text inside a label.
    pub fn text_width(&self) -> usize {
        self.label_max_width_cols
            .saturating_sub(2 * self.label_padding_cols)
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelSize {
    pub width_cols: usize,
    pub height_rows: usize,
}

/// Greedy word wrap at `width` columns; words longer than `width` are hard
/// broken.
pub fn wrap_text(text: &str, width: usize) -> Vec<String> {
    let width = width.max(1);
    let mut rows: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut current_len = 0;
    for word in text.split_whitespace() {
        let mut word: Vec<char> = word.chars().collect();
        loop {
            let needed = if current_len == 0 {
                word.len()
            } else {
                current_len + 1 + word.len()
            };
            if needed <= width {
                if current_len > 0 {
                    current.push(' ');
                    current_len += 1;
                }
                current.extend(word.iter());
                current_len += word.len();
                break;
            }
            if current_len > 0 {
                rows.push(std::mem::take(&mut current));
                current_len = 0;
                continue;
            }
            // Word alone is wider than a row.
            let rest = word.split_off(width);
            rows.push(word.iter().collect());
            word = rest;
            if word.is_empty() {
                break;
            }
        }
    }
    if current_len > 0 {
        rows.push(current);
    }
    rows
}

pub fn measure_label(text: &str, metrics: &GridMetrics) -> LabelSize {
    let rows = wrap_text(text, metrics.text_width());
    let longest = rows.iter().map(|r| char_len(r)).max().unwrap_or(0);
    LabelSize {
        width_cols: longest + 2 * metrics.label_padding_cols,
        height_rows: rows.len().max(1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Expression,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Leader {
    pub from_col: usize,
    pub to_col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelBox {
    pub id: String,
    pub kind: LabelKind,
    /// Code line (suggestion-relative) the label explains.
    pub line: usize,
    /// Grid row. From [`layout_expressions`] this is an offset below the
    /// code row (1 = immediately below); [`full_layout`] makes it absolute.
    pub row: usize,
    pub col: usize,
    pub width_cols: usize,
    pub height_rows: usize,
    pub text_rows: Vec<String>,
    pub leader: Option<Leader>,
    pub color_index: usize,
    /// Label extends past the viewport's right edge.
    pub overflow: bool,
}

impl LabelBox {
    pub fn col_end(&self) -> usize {
        self.col + self.width_cols
    }

    pub fn row_end(&self) -> usize {
        self.row + self.height_rows
    }

    pub fn shares_row(&self, other: &LabelBox) -> bool {
        self.row < other.row_end() && other.row < self.row_end()
    }

    pub fn intersects(&self, other: &LabelBox) -> bool {
        self.col < other.col_end()
            && other.col < self.col_end()
            && self.row < other.row_end()
            && other.row < self.row_end()
    }
}

/// `|[col, col+width) ∩ [colStart, colEnd)| / width < 0.5`, in integers.
pub fn needs_leader(col: usize, width: usize, span_start: usize, span_end: usize) -> bool {
    let lo = col.max(span_start);
    let hi = (col + width).min(span_end);
    let overlap = hi.saturating_sub(lo);
    2 * overlap < width
}

pub fn layout_expressions(
    line_len: usize,
    items: &[ExpressionExplanation],
    metrics: &GridMetrics,
) -> Vec<LabelBox> {
    let mut boxes: Vec<LabelBox> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        debug_assert!(item.span.col_end <= line_len.max(item.span.col_end));
        let rows = wrap_text(&item.text, metrics.text_width());
        let size = measure_label(&item.text, metrics);
        let mut col = item.span.col_start;
        if let Some(prev) = boxes.last() {
            // Occupied interval of the previous label plus one separator.
            let prev_end = prev.col_end() + 1;
            if col < prev_end && prev.col < col + size.width_cols {
                col = prev_end;
            }
        }
        let mut b = LabelBox {
            id: format!("e{}.{}", item.span.line, item.ordinal),
            kind: LabelKind::Expression,
            line: item.span.line,
            row: 1,
            col,
            width_cols: size.width_cols,
            height_rows: size.height_rows,
            text_rows: rows,
            leader: None,
            color_index: item.ordinal % PALETTE_SIZE,
            overflow: col + size.width_cols > metrics.viewport_cols,
        };
        // Drop below the deepest conflicting box until clear. Boxes sharing
        // a row must also keep input order left to right.
        let conflicts =
            |o: &LabelBox, b: &LabelBox| o.intersects(b) || (o.shares_row(b) && o.col >= b.col);
        while let Some(bottom) = boxes
            .iter()
            .filter(|o| conflicts(o, &b))
            .map(LabelBox::row_end)
            .max()
        {
            b.row = bottom;
        }
        if needs_leader(b.col, b.width_cols, item.span.col_start, item.span.col_end) {
            b.leader = Some(Leader {
                from_col: item.span.midpoint(),
                to_col: b.col,
            });
        }
        boxes.push(b);
        debug_assert_eq!(boxes.len(), i + 1);
    }
    boxes
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MarginBox {
    /// Index of the block in its explanation set.
    pub block_ref: usize,
    pub anchor_col: usize,
    pub row_start: usize,
    pub row_end: usize,
    pub fade: bool,
    pub left_border: bool,
    pub width_cols: usize,
    pub text_rows: Vec<String>,
    /// Label extends past the viewport's right edge.
    pub overflow: bool,
}

/// `min(max line length, 80) + gap`.
pub fn margin_anchor_col(line_lengths: &[usize], metrics: &GridMetrics) -> usize {
    line_lengths
        .iter()
        .copied()
        .max()
        .unwrap_or(0)
        .min(MARGIN_CAP_COL)
        + metrics.margin_gap_cols
}

pub fn layout_blocks(
    line_lengths: &[usize],
    blocks: &[BlockExplanation],
    metrics: &GridMetrics,
) -> Vec<MarginBox> {
    if blocks.is_empty() {
        return Vec::new();
    }
    let anchor_col = margin_anchor_col(line_lengths, metrics);
    let code_edge = anchor_col - metrics.margin_gap_cols;
    let wrap = metrics
        .viewport_cols
        .saturating_sub(anchor_col)
        .max(MIN_MARGIN_WRAP);
    blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let covered = line_lengths
                .get(b.start_line..=b.end_line.min(line_lengths.len().saturating_sub(1)));
            let fade = covered.is_some_and(|ls| ls.iter().any(|&l| l > code_edge));
            let text_rows = wrap_text(&b.text, wrap);
            let width_cols = text_rows.iter().map(|r| char_len(r)).max().unwrap_or(0);
            MarginBox {
                block_ref: i,
                anchor_col,
                row_start: b.start_line,
                row_end: b.end_line,
                fade,
                left_border: true,
                width_cols,
                text_rows,
                overflow: anchor_col + width_cols > metrics.viewport_cols,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutPlan {
    pub suggestion_id: String,
    pub hover_line: Option<usize>,
    pub labels: Vec<LabelBox>,
    pub margins: Vec<MarginBox>,
}

/// Places one line's labels at absolute document rows.
pub fn line_labels(
    s: &Suggestion,
    set: &ExplanationSet,
    line: usize,
    metrics: &GridMetrics,
) -> Vec<LabelBox> {
    let Some(text) = s.lines.get(line) else {
        return Vec::new();
    };
    let code_row = s.anchor_line + line;
    let mut boxes = layout_expressions(char_len(text), set.expressions(line), metrics);
    for b in &mut boxes {
        b.row += code_row;
    }
    boxes
}

/// The complete overlay for a suggestion. Multi-line suggestions show
/// expression labels only for the hovered line.
pub fn full_layout(
    s: &Suggestion,
    set: &ExplanationSet,
    hover_line: Option<usize>,
    metrics: &GridMetrics,
) -> Result<LayoutPlan, LayoutError> {
    if set.suggestion_id != s.suggestion_id {
        return Err(LayoutError::StaleSet {
            set: set.suggestion_id.clone(),
            suggestion: s.suggestion_id.clone(),
        });
    }
    let (labels, margins) = match s.kind() {
        SuggestionKind::SingleLine => (line_labels(s, set, 0, metrics), Vec::new()),
        SuggestionKind::MultiLine => {
            let mut margins = layout_blocks(&s.line_lengths(), &set.blocks, metrics);
            for m in &mut margins {
                m.row_start += s.anchor_line;
                m.row_end += s.anchor_line;
            }
            let labels = hover_line
                .map(|l| line_labels(s, set, l, metrics))
                .unwrap_or_default();
            (labels, margins)
        }
    };
    Ok(LayoutPlan {
        suggestion_id: s.suggestion_id.clone(),
        hover_line,
        labels,
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Span;

    fn item(line: usize, s: usize, e: usize, text: &str, ordinal: usize) -> ExpressionExplanation {
        ExpressionExplanation {
            span: Span::new(line, s, e),
            text: text.into(),
            ordinal,
        }
    }

    #[test]
    fn measure_examples() {
        let m = GridMetrics::default();
        assert_eq!(
            measure_label("img", &m),
            LabelSize {
                width_cols: 5,
                height_rows: 1
            }
        );
        let long = "x".repeat(41);
        assert_eq!(measure_label(&long, &m).height_rows, 2);
        assert!(measure_label(&long, &m).width_cols <= m.label_max_width_cols);
    }

    #[test]
    fn wrap_is_greedy() {
        assert_eq!(wrap_text("aa bb cc", 5), vec!["aa bb", "cc"]);
        assert_eq!(wrap_text("abcdefg", 3), vec!["abc", "def", "g"]);
        assert_eq!(wrap_text("ab abcdefg", 4), vec!["ab", "abcd", "efg"]);
    }

    #[test]
    fn canny_labels_pushed_right() {
        // Texts sized to widths 10, 5, 5, 5.
        let items = vec![
            item(0, 0, 8, "cv.Canny", 0),
            item(0, 9, 12, "img", 1),
            item(0, 14, 17, "100", 2),
            item(0, 19, 22, "200", 3),
        ];
        let boxes = layout_expressions(23, &items, &GridMetrics::default());
        let cols: Vec<_> = boxes.iter().map(|b| b.col).collect();
        assert_eq!(cols, vec![0, 11, 17, 23]);
        assert!(boxes.iter().all(|b| b.row == 1));
        // [11,16)∩[9,12) = 1 of 5; [17,22)∩[14,17) = 0; [23,28)∩[19,22) = 0.
        let leaders: Vec<_> = boxes
            .iter()
            .map(|b| b.leader.map(|l| (l.from_col, l.to_col)))
            .collect();
        assert_eq!(
            leaders,
            vec![None, Some((10, 11)), Some((15, 17)), Some((20, 23))]
        );
    }

    #[test]
    fn single_label_no_leader() {
        let boxes = layout_expressions(5, &[item(0, 0, 3, "img", 0)], &GridMetrics::default());
        assert_eq!((boxes[0].col, boxes[0].row), (0, 1));
        assert!(boxes[0].leader.is_none());
    }

    #[test]
    fn identical_spans_second_pushed_fully_right() {
        let items = vec![item(0, 0, 6, "abcd", 0), item(0, 0, 6, "abcd", 1)];
        let boxes = layout_expressions(6, &items, &GridMetrics::default());
        assert_eq!(boxes[0].col, 0);
        assert_eq!(boxes[1].col, 7);
        // [7,13) ∩ [0,6) is empty.
        assert!(boxes[1].leader.is_some());
        let items = vec![item(0, 0, 20, "ab", 0), item(0, 0, 20, "ab", 1)];
        let boxes = layout_expressions(20, &items, &GridMetrics::default());
        assert_eq!(boxes[1].col, 5);
        assert!(boxes[1].leader.is_none());
    }

    #[test]
    fn label_left_of_pushed_neighbor_drops_a_tier() {
        let wide = "w".repeat(18);
        let items = vec![
            item(0, 0, 1, &wide, 0),
            item(0, 1, 2, "a", 1),
            item(0, 2, 3, "b", 2),
        ];
        let boxes = layout_expressions(3, &items, &GridMetrics::default());
        assert_eq!((boxes[0].col, boxes[0].row), (0, 1));
        assert_eq!((boxes[1].col, boxes[1].row), (21, 1));
        assert_eq!((boxes[2].col, boxes[2].row), (2, 2));
    }

    #[test]
    fn margin_anchor_and_fade() {
        let m = GridMetrics::default();
        let blocks = vec![
            BlockExplanation::new(0, 1, "First."),
            BlockExplanation::new(2, 3, "Second."),
        ];
        let boxes = layout_blocks(&[60, 10, 20, 30], &blocks, &m);
        assert!(boxes
            .iter()
            .all(|b| b.anchor_col == 62 && !b.fade && b.left_border));
        let boxes = layout_blocks(&[120, 10, 20, 30], &blocks, &m);
        assert!(boxes.iter().all(|b| b.anchor_col == 82));
        assert_eq!(
            boxes.iter().map(|b| b.fade).collect::<Vec<_>>(),
            vec![true, false]
        );
        assert!(layout_blocks(&[1, 2], &[], &m).is_empty());
    }

    fn plot_suggestion() -> (Suggestion, ExplanationSet) {
        let lines: Vec<String> = (0..5).map(|i| format!("ax.plot(x{i}, y)")).collect();
        let s = Suggestion::new("s1", "d", 10, lines, vec![]).unwrap();
        let mut set = ExplanationSet::new("s1");
        set.blocks.push(BlockExplanation::new(0, 4, "Plots."));
        set.expressions_by_line
            .insert(3, vec![item(3, 0, 7, "Plot call.", 0)]);
        (s, set)
    }

    #[test]
    fn hover_gates_expression_labels() {
        let (s, set) = plot_suggestion();
        let m = GridMetrics::default();
        let plan = full_layout(&s, &set, None, &m).unwrap();
        assert!(plan.labels.is_empty());
        assert_eq!(plan.margins.len(), 1);
        assert_eq!(
            (plan.margins[0].row_start, plan.margins[0].row_end),
            (10, 14)
        );
        let plan = full_layout(&s, &set, Some(3), &m).unwrap();
        assert_eq!(plan.labels.len(), 1);
        assert_eq!(plan.labels[0].row, 14);
    }

    #[test]
    fn stale_set_rejected() {
        let (s, _) = plot_suggestion();
        let other = ExplanationSet::new("other");
        assert!(matches!(
            full_layout(&s, &other, None, &GridMetrics::default()),
            Err(LayoutError::StaleSet { .. })
        ));
    }
}
