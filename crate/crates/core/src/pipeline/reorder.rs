use crate::model::BlockExplanation;

/// Releases streamed blocks in ascending line order.
///
/// A block is released once every line between the end of the last
/// released block and its start is blank, so nothing earlier can still be
/// missing. Overlaps are truncated against what was already released.
#[derive(Debug)]
pub(crate) struct BlockReorder {
    blank: Vec<bool>,
    cursor: usize,
    pending: Vec<BlockExplanation>,
}

impl BlockReorder {
    pub(crate) fn new(lines: &[String]) -> Self {
        BlockReorder {
            blank: lines.iter().map(|l| l.trim().is_empty()).collect(),
            cursor: 0,
            pending: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, block: BlockExplanation) -> Vec<BlockExplanation> {
        let at = self
            .pending
            .partition_point(|p| p.start_line <= block.start_line);
        self.pending.insert(at, block);
        self.release(false)
    }

    pub(crate) fn finish(&mut self) -> Vec<BlockExplanation> {
        self.release(true)
    }

    fn release(&mut self, flush: bool) -> Vec<BlockExplanation> {
        let mut out = Vec::new();
        while let Some(first) = self.pending.first() {
            if first.end_line < self.cursor {
                self.pending.remove(0);
                continue;
            }
            let start = first.start_line.max(self.cursor);
            let gap_clear =
                (self.cursor..start).all(|l| self.blank.get(l).copied().unwrap_or(true));
            if !flush && !gap_clear {
                break;
            }
            let mut b = self.pending.remove(0);
            b.start_line = start;
            self.cursor = b.end_line + 1;
            out.push(b);
        }
        out
    }
}
