//! Depth-aware mini-lexer shared by the mock provider and the validator.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Callee,
    Arg,
    Lhs,
    Rhs,
    Whole,
}

/// One top-level piece of a line with exact column bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopLevelPart {
    pub text: String,
    pub col_start: usize,
    pub col_end: usize,
    pub kind: PartKind,
}

/// The splitter's view of a line: its parts plus the delimiter columns
/// (call parens, argument commas, assignment operator) separating them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LineStructure {
    pub parts: Vec<TopLevelPart>,
    pub delimiters: Vec<usize>,
    pub balanced: bool,
}

impl LineStructure {
    pub fn is_call(&self) -> bool {
        self.parts
            .first()
            .is_some_and(|p| p.kind == PartKind::Callee)
    }

    /// Number of arguments when the line is a call.
    pub fn call_arity(&self) -> Option<usize> {
        self.is_call().then(|| {
            self.parts
                .iter()
                .filter(|p| p.kind == PartKind::Arg)
                .count()
        })
    }

    pub fn callee(&self) -> Option<&TopLevelPart> {
        self.parts.first().filter(|p| p.kind == PartKind::Callee)
    }
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Per-character lexical facts.
struct Lexed {
    chars: Vec<char>,
    /// Bracket nesting depth outside the character (openers and closers
    /// carry the depth of the enclosing context).
    depth: Vec<usize>,
    /// Inside a string literal, quotes included.
    in_string: Vec<bool>,
    /// For each closing bracket, the column of its opener.
    opener_of: Vec<Option<usize>>,
    balanced: bool,
}

fn lex(line: &str) -> Lexed {
    let chars: Vec<char> = line.chars().collect();
    let n = chars.len();
    let mut depth = vec![0; n];
    let mut in_string = vec![false; n];
    let mut opener_of = vec![None; n];
    let mut stack: Vec<(char, usize)> = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut balanced = true;

    for (i, &c) in chars.iter().enumerate() {
        depth[i] = stack.len();
        if let Some(q) = quote {
            in_string[i] = true;
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => {
                quote = Some(c);
                in_string[i] = true;
            }
            '(' | '[' | '{' => stack.push((c, i)),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, at)) if open == want => {
                        depth[i] = stack.len();
                        opener_of[i] = Some(at);
                    }
                    _ => {
                        balanced = false;
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    if quote.is_some() || !stack.is_empty() {
        balanced = false;
    }
    Lexed {
        chars,
        depth,
        in_string,
        opener_of,
        balanced,
    }
}

fn collect(chars: &[char], start: usize, end: usize) -> String {
    chars[start..end].iter().collect()
}

/// Narrows `[start, end)` to exclude surrounding whitespace.
fn trim_range(chars: &[char], mut start: usize, mut end: usize) -> (usize, usize) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    (start, end)
}

fn part(chars: &[char], start: usize, end: usize, kind: PartKind) -> TopLevelPart {
    TopLevelPart {
        text: collect(chars, start, end),
        col_start: start,
        col_end: end,
        kind,
    }
}

pub fn split_top_level(line: &str) -> Vec<TopLevelPart> {
    analyze_line(line).parts
}

/// Splits a line into callee and arguments, assignment sides, or a single
/// whole-line part, recording delimiter columns along the way.
pub fn analyze_line(line: &str) -> LineStructure {
    let lx = lex(line);
    let chars = &lx.chars;
    let (t0, mut t1) = trim_range(chars, 0, chars.len());
    if t0 == t1 {
        return LineStructure {
            balanced: lx.balanced,
            ..Default::default()
        };
    }
    if !lx.balanced {
        return LineStructure {
            parts: vec![part(chars, t0, t1, PartKind::Whole)],
            delimiters: Vec::new(),
            balanced: false,
        };
    }
    if chars[t1 - 1] == ';' && !lx.in_string[t1 - 1] {
        let (_, e) = trim_range(chars, t0, t1 - 1);
        if e > t0 {
            t1 = e;
        }
    }

    if let Some(structure) = split_call(&lx, t0, t1) {
        return structure;
    }
    if let Some(structure) = split_assignment(&lx, t0, t1) {
        return structure;
    }
    LineStructure {
        parts: vec![part(chars, t0, t1, PartKind::Whole)],
        delimiters: Vec::new(),
        balanced: true,
    }
}

/// `callee(args)` spanning the whole trimmed statement.
fn split_call(lx: &Lexed, t0: usize, t1: usize) -> Option<LineStructure> {
    let chars = &lx.chars;
    let close = t1 - 1;
    if chars[close] != ')' || lx.in_string[close] || lx.depth[close] != 0 {
        return None;
    }
    let open = lx.opener_of[close]?;
    if open <= t0 {
        return None;
    }
    let last = chars[open - 1];
    if !(is_ident_char(last) || last == ']' || last == ')') {
        return None;
    }
    let callee_ok = (t0..open).all(|i| {
        let c = chars[i];
        lx.depth[i] > 0
            || lx.in_string[i]
            || is_ident_char(c)
            || matches!(c, '.' | '(' | ')' | '[' | ']' | '{' | '}')
    });
    if !callee_ok {
        return None;
    }

    let mut parts = vec![part(chars, t0, open, PartKind::Callee)];
    let mut delimiters = vec![open];
    let mut piece_start = open + 1;
    for i in open + 1..=close {
        let at_comma = i < close && chars[i] == ',' && !lx.in_string[i] && lx.depth[i] == 1;
        if at_comma || i == close {
            let (s, e) = trim_range(chars, piece_start, i);
            if s < e {
                parts.push(part(chars, s, e, PartKind::Arg));
            }
            delimiters.push(i);
            piece_start = i + 1;
        }
    }
    Some(LineStructure {
        parts,
        delimiters,
        balanced: true,
    })
}

/// First top-level assignment operator, including compound forms.
fn split_assignment(lx: &Lexed, t0: usize, t1: usize) -> Option<LineStructure> {
    let chars = &lx.chars;
    let at = |i: usize| {
        if i < chars.len() {
            Some(chars[i])
        } else {
            None
        }
    };
    let mut i = t0;
    while i < t1 {
        if chars[i] != '=' || lx.in_string[i] || lx.depth[i] != 0 {
            i += 1;
            continue;
        }
        let next = at(i + 1);
        let prev = if i > t0 { Some(chars[i - 1]) } else { None };
        if next == Some('=') {
            i += 2;
            continue;
        }
        if matches!(prev, Some('=') | Some('!')) || next == Some('>') {
            i += 1;
            continue;
        }
        if matches!(prev, Some('<') | Some('>')) {
            let prev2 = if i >= t0 + 2 {
                Some(chars[i - 2])
            } else {
                None
            };
            if prev2 != prev {
                i += 1;
                continue;
            }
        }
        let mut op_start = i;
        while op_start > t0 && "+-*/%&|^@:<>".contains(chars[op_start - 1]) {
            op_start -= 1;
        }
        let (ls, le) = trim_range(chars, t0, op_start);
        let (rs, re) = trim_range(chars, i + 1, t1);
        if ls == le || rs == re {
            return None;
        }
        return Some(LineStructure {
            parts: vec![
                part(chars, ls, le, PartKind::Lhs),
                part(chars, rs, re, PartKind::Rhs),
            ],
            delimiters: (op_start..=i).collect(),
            balanced: true,
        });
    }
    None
}
