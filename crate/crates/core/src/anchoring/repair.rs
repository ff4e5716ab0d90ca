use crate::model::BlockExplanation;

/// Sorts blocks and truncates later overlapping blocks so the result is
/// disjoint, ascending and within `[0, line_count)`.
pub fn repair_blocks(
    mut blocks: Vec<BlockExplanation>,
    line_count: usize,
) -> Vec<BlockExplanation> {
    if line_count == 0 {
        return Vec::new();
    }
    blocks.retain(|b| b.start_line < line_count);
    for b in &mut blocks {
        b.end_line = b.end_line.min(line_count - 1);
    }
    blocks.sort_by_key(|b| b.start_line);
    let mut out: Vec<BlockExplanation> = Vec::with_capacity(blocks.len());
    let mut next_free = 0;
    for mut b in blocks {
        if b.start_line < next_free {
            b.start_line = next_free;
        }
        if b.start_line > b.end_line {
            continue;
        }
        next_free = b.end_line + 1;
        out.push(b);
    }
    out
}
