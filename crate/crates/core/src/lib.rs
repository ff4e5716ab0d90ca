//! Anchored explanations for generated code.
//!
//! Given a just-generated code suggestion, the engine segments it into
//! expressions and multi-line blocks, explains each part briefly, anchors
//! every explanation to exact columns, lays the labels out on a monospace
//! grid without collisions, and serves the result to editors over a
//! newline-delimited JSON protocol.

pub mod anchoring;
pub mod batch;
pub mod exec;
pub mod layout;
pub mod model;
pub mod pipeline;
pub mod session;

pub use exec::ExecMode;
pub use layout::{full_layout, GridMetrics, LabelBox, LayoutPlan, MarginBox};
pub use model::{
    BlockExplanation, ExplanationSet, ExpressionExplanation, Granularity, ProviderConfig,
    ProviderKind, SetStatus, Span, Suggestion, SuggestionKind,
};
pub use pipeline::{ExplanationEvent, Pipeline, PipelineOptions, Provider};
