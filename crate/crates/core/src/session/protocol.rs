//! Newline-delimited JSON wire protocol.
//!
//! Every frame is one JSON object with a `"type"` field. [`WireMessage`] is
//! the untyped frame (it keeps unknown fields); [`ClientMessage`] and
//! [`ServerMessage`] are the typed views.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::layout::{GridMetrics, LayoutPlan};
use crate::model::{BlockExplanation, ExpressionExplanation, ProviderConfig};

pub const PROTOCOL_VERSION: u32 = 1;

pub const CLIENT_TYPES: &[&str] = &[
    "hello",
    "configure",
    "suggestion_shown",
    "suggestion_accepted",
    "suggestion_dismissed",
    "hover",
    "unhover",
    "explain_file",
    "cancel_file",
];

pub const SERVER_TYPES: &[&str] = &["ready", "expressions", "block", "layout", "status", "error"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("unknown message type `{0}`")]
    UnknownType(String),
    #[error("bad payload for `{kind}`: {reason}")]
    BadPayload { kind: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub kind: String,
    pub fields: Map<String, Value>,
}

impl WireMessage {
    pub fn new(kind: impl Into<String>) -> Self {
        WireMessage {
            kind: kind.into(),
            fields: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.fields.insert(key.to_string(), value.into());
        self
    }

    fn into_value(self) -> Value {
        let mut obj = Map::with_capacity(self.fields.len() + 1);
        obj.insert("type".to_string(), Value::String(self.kind));
        for (k, v) in self.fields {
            if k != "type" {
                obj.insert(k, v);
            }
        }
        Value::Object(obj)
    }

    fn from_value(v: Value) -> Result<Self, ProtocolError> {
        let Value::Object(mut obj) = v else {
            return Err(ProtocolError::MalformedFrame(
                "frame is not a JSON object".into(),
            ));
        };
        match obj.shift_remove("type") {
            Some(Value::String(kind)) => Ok(WireMessage { kind, fields: obj }),
            _ => Err(ProtocolError::MalformedFrame(
                "missing string field `type`".into(),
            )),
        }
    }
}

/// One frame: compact JSON, `type` first, terminated by `\n`.
pub fn encode(msg: &WireMessage) -> Vec<u8> {
    let mut out =
        serde_json::to_vec(&msg.clone().into_value()).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

pub fn decode(bytes: &[u8]) -> Result<WireMessage, ProtocolError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    let line = text.strip_suffix('\n').unwrap_or(text);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains('\n') {
        return Err(ProtocolError::MalformedFrame(
            "frame spans more than one line".into(),
        ));
    }
    let v: Value =
        serde_json::from_str(line).map_err(|e| ProtocolError::MalformedFrame(e.to_string()))?;
    WireMessage::from_value(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum ClientMessage {
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        protocol_version: Option<u32>,
    },
    Configure {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provider: Option<ProviderConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<GridMetrics>,
    },
    SuggestionShown {
        suggestion_id: String,
        doc_id: String,
        #[serde(default)]
        doc_content_hash: String,
        anchor_line: usize,
        lines: Vec<String>,
        #[serde(default)]
        preceding_context: Vec<String>,
    },
    SuggestionAccepted {
        suggestion_id: String,
    },
    SuggestionDismissed {
        suggestion_id: String,
    },
    /// `line` is an absolute document line.
    Hover {
        line: usize,
    },
    Unhover {},
    ExplainFile {
        doc_id: String,
        #[serde(default)]
        doc_content_hash: String,
        lines: Vec<String>,
    },
    CancelFile {
        doc_id: String,
    },
}

/// Which suggestion, document or session a server message concerns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Subject {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

impl Subject {
    pub fn suggestion(suggestion_id: &str, doc_id: &str) -> Self {
        Subject {
            suggestion_id: Some(suggestion_id.into()),
            doc_id: Some(doc_id.into()),
            session_id: None,
        }
    }

    pub fn doc(doc_id: &str) -> Self {
        Subject {
            doc_id: Some(doc_id.into()),
            ..Default::default()
        }
    }

    pub fn session(session_id: &str) -> Self {
        Subject {
            session_id: Some(session_id.into()),
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.suggestion_id.is_none() && self.doc_id.is_none() && self.session_id.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusState {
    Configured,
    Pending,
    Partial,
    Complete,
    Failed,
    Cancelled,
    Idle,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownType,
    BadPayload,
    NoActive,
    RequestFailed,
    ProviderUnavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    rename_all = "snake_case",
    rename_all_fields = "camelCase"
)]
pub enum ServerMessage {
    Ready {
        #[serde(flatten)]
        subject: Subject,
        protocol_version: u32,
        server: String,
    },
    Status {
        #[serde(flatten)]
        subject: Subject,
        state: StatusState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Expressions {
        #[serde(flatten)]
        subject: Subject,
        /// Suggestion-relative line.
        line: usize,
        doc_line: usize,
        items: Vec<ExpressionExplanation>,
    },
    Block {
        #[serde(flatten)]
        subject: Subject,
        block: BlockExplanation,
        doc_start_line: usize,
    },
    Layout {
        #[serde(flatten)]
        subject: Subject,
        plan: LayoutPlan,
    },
    Error {
        #[serde(flatten)]
        subject: Subject,
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn subject(&self) -> &Subject {
        match self {
            ServerMessage::Ready { subject, .. }
            | ServerMessage::Status { subject, .. }
            | ServerMessage::Expressions { subject, .. }
            | ServerMessage::Block { subject, .. }
            | ServerMessage::Layout { subject, .. }
            | ServerMessage::Error { subject, .. } => subject,
        }
    }

    /// Expressions, block and layout messages carry explanation content.
    pub fn is_content(&self) -> bool {
        matches!(
            self,
            ServerMessage::Expressions { .. }
                | ServerMessage::Block { .. }
                | ServerMessage::Layout { .. }
        )
    }

    pub fn error(subject: Subject, code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            subject,
            code,
            message: message.into(),
        }
    }

    pub fn status(subject: Subject, state: StatusState) -> Self {
        ServerMessage::Status {
            subject,
            state,
            detail: None,
        }
    }
}

fn to_wire<T: Serialize>(m: &T) -> WireMessage {
    let v = serde_json::to_value(m).expect("protocol types serialize");
    WireMessage::from_value(v).expect("protocol types are tagged objects")
}

impl ClientMessage {
    pub fn to_wire(&self) -> WireMessage {
        to_wire(self)
    }

    pub fn from_wire(w: &WireMessage) -> Result<Self, ProtocolError> {
        if !CLIENT_TYPES.contains(&w.kind.as_str()) {
            return Err(ProtocolError::UnknownType(w.kind.clone()));
        }
        serde_json::from_value(w.clone().into_value()).map_err(|e| ProtocolError::BadPayload {
            kind: w.kind.clone(),
            reason: e.to_string(),
        })
    }
}

impl ServerMessage {
    pub fn to_wire(&self) -> WireMessage {
        to_wire(self)
    }

    pub fn from_wire(w: &WireMessage) -> Result<Self, ProtocolError> {
        if !SERVER_TYPES.contains(&w.kind.as_str()) {
            return Err(ProtocolError::UnknownType(w.kind.clone()));
        }
        serde_json::from_value(w.clone().into_value()).map_err(|e| ProtocolError::BadPayload {
            kind: w.kind.clone(),
            reason: e.to_string(),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        encode(&self.to_wire())
    }
}
