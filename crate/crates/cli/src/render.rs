//! Plain-text rendering of a laid-out explanation: block labels in the right
//! margin, expression labels on rows inserted under their code line.

use std::collections::BTreeMap;

use ivie_core::{GridMetrics, LabelBox, MarginBox};

struct Canvas(Vec<char>);

impl Canvas {
    fn new() -> Self {
        Canvas(Vec::new())
    }

    fn put(&mut self, col: usize, c: char) {
        if self.0.len() <= col {
            self.0.resize(col + 1, ' ');
        }
        self.0[col] = c;
    }

    fn put_str(&mut self, col: usize, s: &str) {
        for (i, c) in s.chars().enumerate() {
            self.put(col + i, c);
        }
    }

    fn finish(self) -> String {
        let s: String = self.0.into_iter().collect();
        s.trim_end().to_string()
    }
}

/// Code truncated to `width` columns, ending in `…` when cut.
fn clip(code: &str, width: usize) -> String {
    if code.chars().count() <= width {
        return code.to_string();
    }
    let mut s: String = code.chars().take(width.saturating_sub(1)).collect();
    s.push('…');
    s
}

fn margin_row(code: &str, m: &MarginBox, text: Option<&str>, grid: &GridMetrics) -> String {
    let edge = m.anchor_col - grid.margin_gap_cols;
    let mut c = Canvas::new();
    c.put_str(0, &clip(code, edge));
    if m.left_border && grid.margin_gap_cols > 0 {
        c.put(m.anchor_col - 1, '│');
    }
    if let Some(t) = text {
        c.put_str(m.anchor_col, t);
    }
    c.finish()
}

fn label_rows(line: usize, labels: &[LabelBox], grid: &GridMetrics) -> Vec<String> {
    let mut rows = Vec::new();
    if labels.iter().any(|l| l.leader.is_some()) {
        let mut c = Canvas::new();
        for l in labels {
            if let Some(ld) = l.leader {
                let (lo, hi) = (ld.from_col.min(ld.to_col), ld.from_col.max(ld.to_col));
                for col in lo..=hi {
                    c.put(col, '-');
                }
                c.put(ld.to_col, '+');
                c.put(ld.from_col, '^');
            }
        }
        rows.push(c.finish());
    }
    // Label rows are absolute; the code line sits at row `line`.
    let depth = labels.iter().map(|l| l.row_end() - line).max().unwrap_or(1);
    for offset in 1..depth {
        let row = line + offset;
        let mut c = Canvas::new();
        for l in labels.iter().filter(|l| l.row <= row && row < l.row_end()) {
            for col in l.col..l.col_end() {
                c.put(col, ' ');
            }
            if grid.label_padding_cols > 0 {
                c.put(l.col, '[');
                c.put(l.col_end() - 1, ']');
            }
            if let Some(t) = l.text_rows.get(row - l.row) {
                c.put_str(l.col + grid.label_padding_cols, t);
            }
        }
        rows.push(c.finish());
    }
    rows
}

pub fn annotated(
    lines: &[String],
    margins: &[MarginBox],
    labels_by_line: &BTreeMap<usize, Vec<LabelBox>>,
    grid: &GridMetrics,
) -> String {
    let mut out = String::new();
    let mut push = |s: &str| {
        out.push_str(s);
        out.push('\n');
    };
    for (i, code) in lines.iter().enumerate() {
        let margin = margins.iter().find(|m| m.row_start <= i && i <= m.row_end);
        match margin {
            Some(m) => push(&margin_row(
                code,
                m,
                m.text_rows.get(i - m.row_start).map(String::as_str),
                grid,
            )),
            None => push(code),
        }
        if let Some(labels) = labels_by_line.get(&i) {
            for r in label_rows(i, labels, grid) {
                push(&r);
            }
        }
        if let Some(m) = margin.filter(|m| m.row_end == i) {
            let covered = m.row_end - m.row_start + 1;
            for t in m.text_rows.iter().skip(covered) {
                push(&margin_row("", m, Some(t), grid));
            }
        }
    }
    out
}
