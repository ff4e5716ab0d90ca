//! Decoding of provider payloads in the JSON-array formats the prompts ask for.

use serde_json::{Map, Value};
use thiserror::Error;

use super::anchor::RawSegment;
use crate::model::{normalize_explanation_text, BlockExplanation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("no well-formed JSON array of objects found in provider output")]
    Unparseable,
}

/// Returns the first JSON array whose elements are all objects, skipping
/// surrounding prose and code fences.
pub fn find_object_array(text: &str) -> Option<Vec<Map<String, Value>>> {
    for (i, c) in text.char_indices() {
        if c != '[' {
            continue;
        }
        let mut values = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = values.next() {
            if items.iter().all(Value::is_object) {
                return Some(
                    items
                        .into_iter()
                        .filter_map(|v| match v {
                            Value::Object(m) => Some(m),
                            _ => None,
                        })
                        .collect(),
                );
            }
        }
    }
    None
}

fn string_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    obj.get(key)
        .and_then(Value::as_str)
        .filter(|s| !s.trim().is_empty())
}

fn int_field(obj: &Map<String, Value>, key: &str) -> Option<i64> {
    match obj.get(key)? {
        Value::Number(n) => n.as_i64().or_else(|| n.as_f64().map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

pub fn parse_expression_payload(text: &str) -> Result<Vec<RawSegment>, PayloadError> {
    let objects = find_object_array(text).ok_or(PayloadError::Unparseable)?;
    Ok(objects
        .iter()
        .filter_map(|o| {
            let seg = string_field(o, "segment")?;
            let exp = string_field(o, "explanation")?;
            Some(RawSegment::new(seg, exp))
        })
        .collect())
}

/// Decodes one `{startLine, endLine, explanation}` object, clamping indices
/// into `[0, line_count - 1]`.
pub fn block_from_object(obj: &Map<String, Value>, line_count: usize) -> Option<BlockExplanation> {
    if line_count == 0 {
        return None;
    }
    let max = line_count as i64 - 1;
    let start = int_field(obj, "startLine")?.clamp(0, max) as usize;
    let end = int_field(obj, "endLine")?.clamp(0, max) as usize;
    if start > end {
        return None;
    }
    let text = normalize_explanation_text(string_field(obj, "explanation")?).ok()?;
    Some(BlockExplanation::new(start, end, text))
}

pub fn parse_block_payload(
    text: &str,
    line_count: usize,
) -> Result<Vec<BlockExplanation>, PayloadError> {
    let objects = find_object_array(text).ok_or(PayloadError::Unparseable)?;
    Ok(objects
        .iter()
        .filter_map(|o| block_from_object(o, line_count))
        .collect())
}

/// Incremental scanner that yields each object of a streamed top-level
/// JSON array as soon as its closing brace arrives.
#[derive(Debug, Default)]
pub struct ArrayObjectScanner {
    in_array: bool,
    depth: usize,
    in_string: bool,
    escaped: bool,
    current: String,
}

impl ArrayObjectScanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, chunk: &str) -> Vec<Map<String, Value>> {
        let mut done = Vec::new();
        for c in chunk.chars() {
            if !self.in_array {
                if c == '[' {
                    self.in_array = true;
                    self.depth = 0;
                }
                continue;
            }
            if self.depth > 0 {
                self.current.push(c);
            }
            if self.in_string {
                if self.escaped {
                    self.escaped = false;
                } else if c == '\\' {
                    self.escaped = true;
                } else if c == '"' {
                    self.in_string = false;
                }
                continue;
            }
            match c {
                '"' if self.depth > 0 => self.in_string = true,
                '{' | '[' => {
                    if self.depth == 0 {
                        if c == '[' {
                            // Nested array outside any object: not our format.
                            self.in_array = false;
                            continue;
                        }
                        self.current.clear();
                        self.current.push(c);
                    }
                    self.depth += 1;
                }
                '}' | ']' => {
                    if self.depth == 0 {
                        // End of the array (or stray bracket in prose).
                        self.in_array = false;
                        continue;
                    }
                    self.depth -= 1;
                    if self.depth == 0 {
                        if let Ok(Value::Object(m)) = serde_json::from_str(&self.current) {
                            done.push(m);
                        }
                        self.current.clear();
                    }
                }
                _ => {}
            }
        }
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_decode() {
        let segs =
            parse_expression_payload(r#"[{"segment":"cv.Canny","explanation":"Edge detector."}]"#)
                .unwrap();
        assert_eq!(segs, vec![RawSegment::new("cv.Canny", "Edge detector.")]);
    }

    #[test]
    fn fenced_array_with_prose() {
        let text = "Here you go:\n```json\n[{\"segment\": \"img\", \"explanation\": \"Input image.\"},\n {\"segment\": \"100\", \"explanation\": \"Low threshold.\"}]\n```\nHope that helps [really].";
        let segs = parse_expression_payload(text).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].segment_text, "100");
    }

    #[test]
    fn prose_brackets_before_array_are_skipped() {
        let text = "See [1] and [\"x\"]: [{\"segment\":\"a\",\"explanation\":\"A.\"}]";
        assert_eq!(parse_expression_payload(text).unwrap().len(), 1);
    }

    #[test]
    fn no_json_is_unparseable() {
        assert_eq!(
            parse_expression_payload("no json here"),
            Err(PayloadError::Unparseable)
        );
        assert_eq!(
            parse_block_payload("[{\"startLine\": 1", 3),
            Err(PayloadError::Unparseable)
        );
    }

    #[test]
    fn blank_entries_dropped_order_kept() {
        let text = r#"[{"segment":"b","explanation":"B."},{"segment":" ","explanation":"x"},{"segment":"a"},{"segment":"a","explanation":"A."}]"#;
        let segs = parse_expression_payload(text).unwrap();
        assert_eq!(
            segs.iter()
                .map(|s| s.segment_text.as_str())
                .collect::<Vec<_>>(),
            vec!["b", "a"]
        );
    }

    #[test]
    fn block_payload_from_plot_description() {
        let text = r#"[{"startLine":3,"endLine":7,"explanation":"Plot the temperature data for the city with the highest temperature in the top subplot."}]"#;
        let blocks = parse_block_payload(text, 16).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!((blocks[0].start_line, blocks[0].end_line), (3, 7));
    }

    #[test]
    fn block_indices_clamped_and_inverted_dropped() {
        let text = r#"[{"startLine":-2,"endLine":1,"explanation":"A."},{"startLine":3,"endLine":99,"explanation":"B."},{"startLine":4,"endLine":2,"explanation":"C."}]"#;
        let blocks = parse_block_payload(text, 5).unwrap();
        assert_eq!(
            blocks
                .iter()
                .map(|b| (b.start_line, b.end_line))
                .collect::<Vec<_>>(),
            vec![(0, 1), (3, 4)]
        );
        assert!(parse_block_payload("[]", 5).unwrap().is_empty());
    }

    #[test]
    fn scanner_yields_objects_across_chunks() {
        let mut sc = ArrayObjectScanner::new();
        let mut got = Vec::new();
        for chunk in [
            "Sure: [{\"startLine\": 0, \"endLine\"",
            ": 1, \"explanation\": \"Has } and { in it.\"}",
            ", {\"startLine\": 2, ",
            "\"endLine\": 2, \"explanation\": \"Q\\\"uoted.\"}]",
        ] {
            got.extend(sc.feed(chunk));
        }
        assert_eq!(got.len(), 2);
        assert_eq!(
            block_from_object(&got[0], 3).unwrap().text,
            "Has } and { in it."
        );
        assert_eq!(block_from_object(&got[1], 3).unwrap().start_line, 2);
    }
}
