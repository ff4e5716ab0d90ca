mod common;

use std::collections::HashMap;
use std::sync::Arc;

use common::{cells_disjoint, leader_rule_holds, oracle_anchor};
use ivie_core::anchoring::{
    analyze_line, anchor_segments, repair_blocks, split_top_level, validate_expressions, RawSegment,
};
use ivie_core::layout::{
    full_layout, layout_blocks, layout_expressions, margin_anchor_col, MARGIN_CAP_COL,
};
use ivie_core::model::{check_consistency, normalize_explanation_text, suggestion_kind};
use ivie_core::pipeline::{mock_block_segments, mock_segment_line, MockProvider};
use ivie_core::{
    BlockExplanation, ExplanationSet, ExpressionExplanation, GridMetrics, Pipeline, ProviderConfig,
    Span, Suggestion, SuggestionKind,
};
use proptest::prelude::*;

fn code_line() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-z0-9_.,()\\[\\]=+* '\"é]{0,32}").unwrap()
}

fn ident() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-z_][a-z0-9_]{0,6}").unwrap()
}

fn arg() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        ident(),
        (0u32..1000).prop_map(|n| n.to_string()),
        prop::string::string_regex("'[a-z ,()]{0,6}'").unwrap(),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            (ident(), prop::collection::vec(inner.clone(), 0..3))
                .prop_map(|(f, a)| format!("{f}({})", a.join(", "))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|a| format!("({})", a.join(", "))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|a| format!("[{}]", a.join(", "))),
            (ident(), inner).prop_map(|(k, v)| format!("{k}={v}")),
        ]
    })
}

/// A call statement plus the argument texts it was built from.
fn call_line() -> impl Strategy<Value = (String, String, Vec<String>)> {
    (
        prop::collection::vec(ident(), 1..3),
        prop::collection::vec(arg(), 1..5),
        prop_oneof![Just(", "), Just(","), Just(" , ")],
        prop_oneof![Just(""), Just("    ")],
    )
        .prop_map(|(path, args, sep, indent)| {
            let callee = path.join(".");
            (
                format!("{indent}{callee}({})", args.join(sep)),
                callee,
                args,
            )
        })
}

fn explanation_items() -> impl Strategy<Value = (usize, Vec<ExpressionExplanation>)> {
    (
        prop::collection::vec((0usize..6, 1usize..9), 0..9),
        prop::collection::vec(
            prop::string::string_regex("[A-Za-z]{1,12}( [A-Za-z]{1,12}){0,9}\\.").unwrap(),
            9,
        ),
    )
        .prop_map(|(gaps, texts)| {
            let mut col = 0;
            let items = gaps
                .iter()
                .enumerate()
                .map(|(i, &(gap, len))| {
                    let start = col + gap;
                    col = start + len;
                    ExpressionExplanation {
                        span: Span::new(0, start, col),
                        text: texts[i].clone(),
                        ordinal: i,
                    }
                })
                .collect();
            (col, items)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn normalization_is_idempotent(raw in ".{0,200}") {
        if let Ok(once) = normalize_explanation_text(&raw) {
            prop_assert_eq!(normalize_explanation_text(&once).unwrap(), once);
        }
    }

    #[test]
    fn kind_depends_only_on_line_count(lines in prop::collection::vec(code_line(), 1..6)) {
        let s = Suggestion::new("s", "d", 0, lines.clone(), vec![]).unwrap();
        let expected = if lines.len() == 1 { SuggestionKind::SingleLine } else { SuggestionKind::MultiLine };
        prop_assert_eq!(suggestion_kind(&s), expected);
    }

    #[test]
    fn anchoring_matches_brute_force(line in code_line(), picks in prop::collection::vec((0usize..40, 0usize..12, 0u8..4), 0..6)) {
        let chars: Vec<char> = line.chars().collect();
        let segs: Vec<(String, String)> = picks
            .iter()
            .map(|&(a, len, mutate)| {
                let a = a.min(chars.len());
                let b = (a + len).min(chars.len());
                let mut seg: String = chars[a..b].iter().collect();
                match mutate {
                    1 => seg = format!(" {seg} "),
                    2 => seg.retain(|c| c != ' '),
                    3 => seg.push('#'),
                    _ => {}
                }
                (seg, "Explains it.".to_string())
            })
            .collect();
        let raw: Vec<RawSegment> = segs.iter().map(|(s, e)| RawSegment::new(s.clone(), e.clone())).collect();
        let got: Vec<(usize, usize)> =
            anchor_segments(0, &line, &raw).iter().map(|i| (i.span.col_start, i.span.col_end)).collect();
        prop_assert_eq!(got, oracle_anchor(&line, &segs));
    }

    #[test]
    fn anchoring_splitter_parts_reproduces_their_spans(line in code_line()) {
        let parts = split_top_level(&line);
        let raw: Vec<RawSegment> = parts.iter().map(|p| RawSegment::new(p.text.clone(), "Part.")).collect();
        let got: Vec<(usize, usize)> =
            anchor_segments(0, &line, &raw).iter().map(|i| (i.span.col_start, i.span.col_end)).collect();
        let want: Vec<(usize, usize)> = parts.iter().map(|p| (p.col_start, p.col_end)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn call_lines_split_into_callee_and_arguments((line, callee, args) in call_line()) {
        let st = analyze_line(&line);
        prop_assert!(st.is_call());
        prop_assert_eq!(&st.callee().unwrap().text, &callee);
        let got: Vec<&str> = st.parts[1..].iter().map(|p| p.text.as_str()).collect();
        prop_assert_eq!(got, args.iter().map(String::as_str).collect::<Vec<_>>());
        for p in &st.parts {
            let slice: String = line.chars().skip(p.col_start).take(p.col_end - p.col_start).collect();
            prop_assert_eq!(&slice, &p.text);
        }
        // Mock output on a call line is complete and passes every check.
        let items = anchor_segments(0, &line, &mock_segment_line(&line).unwrap());
        let report = validate_expressions(&line, &items, st.call_arity());
        prop_assert!(report.complete && report.accurate_bounds && report.proper_segmentation, "{:?}", report);
    }

    #[test]
    fn repaired_blocks_are_sorted_disjoint_and_in_range(
        raw in prop::collection::vec((0usize..30, 0usize..30), 0..12),
        line_count in 1usize..25,
    ) {
        let blocks: Vec<BlockExplanation> = raw
            .iter()
            .map(|&(a, b)| BlockExplanation::new(a.min(b), a.max(b), "Step."))
            .collect();
        let out = repair_blocks(blocks, line_count);
        for b in &out {
            prop_assert!(b.start_line <= b.end_line && b.end_line < line_count);
        }
        for w in out.windows(2) {
            prop_assert!(w[0].end_line < w[1].start_line);
        }
    }

    #[test]
    fn expression_layout_properties((line_len, items) in explanation_items(), viewport in 40usize..160) {
        let m = GridMetrics { viewport_cols: viewport, ..GridMetrics::default() };
        let labels = layout_expressions(line_len, &items, &m);
        prop_assert_eq!(labels.len(), items.len());
        prop_assert!(cells_disjoint(&labels));
        let mut last_col_by_row: HashMap<usize, usize> = HashMap::new();
        for (l, it) in labels.iter().zip(&items) {
            prop_assert!(l.row >= 1);
            prop_assert!(l.width_cols <= m.label_max_width_cols);
            prop_assert!(leader_rule_holds(l, it.span.col_start, it.span.col_end));
            prop_assert_eq!(l.overflow, l.col + l.width_cols > viewport);
            if let Some(&prev) = last_col_by_row.get(&l.row) {
                prop_assert!(l.col > prev, "cols not increasing in row {}", l.row);
            }
            last_col_by_row.insert(l.row, l.col);
        }
        prop_assert_eq!(layout_expressions(line_len, &items, &m), labels);
    }

    #[test]
    fn margin_layout_properties(lens in prop::collection::vec(0usize..200, 1..30), viewport in 40usize..200) {
        let m = GridMetrics { viewport_cols: viewport, ..GridMetrics::default() };
        let n = lens.len();
        let blocks: Vec<BlockExplanation> =
            (0..n).step_by(3).map(|s| BlockExplanation::new(s, (s + 2).min(n - 1), "Does a step of the work.")).collect();
        let boxes = layout_blocks(&lens, &blocks, &m);
        let anchor = lens.iter().copied().max().unwrap().min(80) + 2;
        prop_assert_eq!(margin_anchor_col(&lens, &m), anchor);
        prop_assert!(anchor <= MARGIN_CAP_COL + m.margin_gap_cols);
        for b in &boxes {
            prop_assert_eq!(b.anchor_col, anchor);
            let fades = lens[b.row_start..=b.row_end].iter().any(|&l| l > anchor - 2);
            prop_assert_eq!(b.fade, fades);
        }
    }
}

fn edge_demo() -> Suggestion {
    Suggestion::new(
        "edge_demo",
        "edges.py",
        7,
        [
            "img = cv2.imread('messi5.jpg', 0)",
            "img = cv2.GaussianBlur(img, (5, 5), 0)",
            "edges = cv2.Canny(img, 100, 200)",
            "",
            "plt.subplot(121), plt.imshow(img, cmap='gray')",
            "plt.title('Original Image')",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        vec![],
    )
    .unwrap()
}

#[test]
fn mock_is_pure() {
    let s = edge_demo();
    for line in &s.lines {
        assert_eq!(mock_segment_line(line), mock_segment_line(line));
    }
    assert_eq!(mock_block_segments(&s.lines), mock_block_segments(&s.lines));
}

#[test]
fn full_layout_is_pure_and_consistent() {
    let s = edge_demo();
    let set = Pipeline::new(Arc::new(MockProvider), ProviderConfig::default())
        .explain(&s)
        .unwrap();
    check_consistency(&s, &set).unwrap();
    let m = GridMetrics::default();
    for hover in [None, Some(0), Some(2), Some(3)] {
        let a = full_layout(&s, &set, hover, &m).unwrap();
        assert_eq!(a, full_layout(&s, &set, hover, &m).unwrap());
        assert!(cells_disjoint(&a.labels));
        let anchors: Vec<usize> = a.margins.iter().map(|b| b.anchor_col).collect();
        assert!(anchors.windows(2).all(|w| w[0] == w[1]));
    }
    let stale = ExplanationSet::new("other");
    assert!(full_layout(&s, &stale, None, &m).is_err());
}
