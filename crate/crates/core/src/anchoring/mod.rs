//! Turning provider output into exact, validated spans.

mod anchor;
mod lexer;
mod payload;
mod repair;
mod validate;

pub use anchor::{
    anchor_segments, anchor_segments_detailed, AnchorOutcome, DroppedSegment, MatchStage,
    RawSegment,
};
pub use lexer::{analyze_line, split_top_level, LineStructure, PartKind, TopLevelPart};
pub use payload::{
    block_from_object, find_object_array, parse_block_payload, parse_expression_payload,
    ArrayObjectScanner, PayloadError,
};
pub use repair::repair_blocks;
pub use validate::{validate_expressions, Criterion, Note, Severity, ValidationReport};
