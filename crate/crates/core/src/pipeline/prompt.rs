//! The two prompt kinds: per-line expression segmentation and whole
//! suggestion block segmentation. Both ask for a JSON array so the answer
//! can be decoded mechanically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("line is blank")]
    BlankLine,
    #[error("block explanations need at least 2 lines, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptKind {
    ExpressionLevel,
    BlockLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prompt {
    pub kind: PromptKind,
    pub text: String,
    /// Suggestion line the prompt explains (expression prompts only).
    pub target_line: Option<usize>,
    /// The code embedded in `text`, line by line.
    pub code: Vec<String>,
}

pub const EXAMPLE_MARKER: &str = "### Example";

const EXPRESSION_INSTRUCTIONS: &str = "\
You explain code that a programming assistant has just suggested.
Split the suggested line of code into its meaningful expressions: the function being called, each argument, and other major sub-expressions.
Give each expression a brief yet informative explanation of one or two sentences.
Answer with only a JSON array of objects of the form {\"segment\": string, \"explanation\": string}, listed in the left-to-right order the expressions appear in the line.
Copy every \"segment\" exactly as it appears in the line, without surrounding commas or parentheses.";

const EXPRESSION_EXAMPLE: &str = "\
### Example
Line:
np.linspace(0, 10, num=50)
Answer:
[{\"segment\": \"np.linspace\", \"explanation\": \"Returns evenly spaced numbers over an interval.\"}, {\"segment\": \"0\", \"explanation\": \"The start of the interval.\"}, {\"segment\": \"10\", \"explanation\": \"The end of the interval.\"}, {\"segment\": \"num=50\", \"explanation\": \"Generates 50 samples, including both endpoints.\"}]";

const BLOCK_INSTRUCTIONS: &str = "\
You explain code that a programming assistant has just suggested.
Split the suggested code into contiguous steps, each usually spanning several lines, that together cover the code.
Give each step a brief explanation of one or two sentences describing what it accomplishes.
Answer with only a JSON array of objects of the form {\"startLine\": int, \"endLine\": int, \"explanation\": string}, where startLine and endLine are the inclusive 0-based line numbers shown before each line.
List steps in ascending order without overlaps.";

const BLOCK_EXAMPLE: &str = "\
### Example
Code:
0: fig, ax = plt.subplots()
1: ax.plot(days, temps)
2: ax.set_xlabel(\"Day\")
3: ax.set_ylabel(\"Temperature\")
Answer:
[{\"startLine\": 0, \"endLine\": 1, \"explanation\": \"Creates a figure and plots temperature by day.\"}, {\"startLine\": 2, \"endLine\": 3, \"explanation\": \"Labels the x and y axes.\"}]";

fn push_context(out: &mut String, context: &[String]) {
    out.push_str("<context>\n");
    for line in context {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("</context>\n");
}

pub fn build_expression_prompt(line: &str, context: &[String]) -> Result<Prompt, PromptError> {
    build_expression_prompt_for(line, context, None)
}

pub(crate) fn build_expression_prompt_for(
    line: &str,
    context: &[String],
    target_line: Option<usize>,
) -> Result<Prompt, PromptError> {
    if line.trim().is_empty() {
        return Err(PromptError::BlankLine);
    }
    let mut text = String::new();
    text.push_str(EXPRESSION_INSTRUCTIONS);
    text.push_str("\n\n");
    text.push_str(EXPRESSION_EXAMPLE);
    text.push_str("\n\nCode preceding the line, for reference only:\n");
    push_context(&mut text, context);
    text.push_str("Line:\n<line>\n");
    text.push_str(line);
    text.push_str("\n</line>\nAnswer:\n");
    Ok(Prompt {
        kind: PromptKind::ExpressionLevel,
        text,
        target_line: Some(target_line.unwrap_or(0)),
        code: vec![line.to_string()],
    })
}

pub fn build_block_prompt(lines: &[String], context: &[String]) -> Result<Prompt, PromptError> {
    if lines.len() < 2 {
        return Err(PromptError::TooShort(lines.len()));
    }
    let mut text = String::new();
    text.push_str(BLOCK_INSTRUCTIONS);
    text.push_str("\n\n");
    text.push_str(BLOCK_EXAMPLE);
    text.push_str("\n\nCode preceding the suggestion, for reference only:\n");
    push_context(&mut text, context);
    text.push_str("Code:\n<code>\n");
    for (i, line) in lines.iter().enumerate() {
        text.push_str(&format!("{i}: {line}\n"));
    }
    text.push_str("</code>\nAnswer:\n");
    Ok(Prompt {
        kind: PromptKind::BlockLevel,
        text,
        target_line: None,
        code: lines.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_prompt_embeds_line_once_with_one_example() {
        let p = build_expression_prompt("cv.Canny(img, 100, 200)", &[]).unwrap();
        assert_eq!(p.kind, PromptKind::ExpressionLevel);
        assert_eq!(p.text.matches("cv.Canny(img, 100, 200)").count(), 1);
        assert_eq!(p.text.matches(EXAMPLE_MARKER).count(), 1);
        assert!(p
            .text
            .contains("{\"segment\": string, \"explanation\": string}"));
        assert!(p.text.contains("left-to-right"));
    }

    #[test]
    fn context_precedes_target() {
        let ctx = vec![
            "import cv2 as cv".to_string(),
            "img = cv.imread('a.png')".to_string(),
        ];
        let p = build_expression_prompt("cv.Canny(img, 100, 200)", &ctx).unwrap();
        let c = p.text.find("img = cv.imread").unwrap();
        let t = p.text.find("<line>\ncv.Canny").unwrap();
        assert!(c < t);
    }

    #[test]
    fn blank_line_rejected() {
        assert_eq!(
            build_expression_prompt("   ", &[]),
            Err(PromptError::BlankLine)
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        let ctx = vec!["a = 1".to_string()];
        assert_eq!(
            build_expression_prompt("f(a)", &ctx),
            build_expression_prompt("f(a)", &ctx)
        );
        let lines = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            build_block_prompt(&lines, &ctx),
            build_block_prompt(&lines, &ctx)
        );
    }

    #[test]
    fn block_prompt_numbers_every_line() {
        let lines: Vec<String> = (0..16)
            .map(|i| format!("ax[{}].plot(x, y{i})", i % 2))
            .collect();
        let p = build_block_prompt(&lines, &[]).unwrap();
        for (i, l) in lines.iter().enumerate() {
            assert!(p.text.contains(&format!("\n{i}: {l}\n")));
        }
        assert_eq!(p.code.len(), 16);
        assert_eq!(p.text.matches(EXAMPLE_MARKER).count(), 1);
        assert!(p
            .text
            .contains("\"startLine\": int, \"endLine\": int, \"explanation\": string"));
    }

    #[test]
    fn block_prompt_too_short() {
        assert_eq!(
            build_block_prompt(&["a".to_string()], &[]),
            Err(PromptError::TooShort(1))
        );
    }
}
