//! Editor-facing session: consumes client messages, drives the pipeline and
//! answers with explanation content, layout plans and status updates.

mod cache;
mod protocol;
mod serve;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

pub use cache::{CacheKey, ExplanationCache, DEFAULT_CACHE_CAPACITY};
pub use protocol::{
    decode, encode, ClientMessage, ErrorCode, ProtocolError, ServerMessage, StatusState, Subject,
    WireMessage, CLIENT_TYPES, PROTOCOL_VERSION, SERVER_TYPES,
};
pub use serve::{serve_io, serve_stdio, WsServer};

use crate::exec::ExecMode;
use crate::layout::{full_layout, GridMetrics};
use crate::model::{ExplanationSet, Granularity, ProviderConfig, SetStatus, Suggestion};
use crate::pipeline::{
    provider_from_config, Delivery, ExplanationEvent, Pipeline, PipelineError, PipelineOptions,
    Provider, ProviderError, RequestHandle,
};

pub const DEFAULT_DEBOUNCE: Duration = Duration::from_millis(150);

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub provider: ProviderConfig,
    pub grid: GridMetrics,
    pub granularity: Granularity,
    pub exec: ExecMode,
    /// Delay before a non-deterministic provider is contacted.
    pub debounce: Duration,
    pub cache_capacity: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            provider: ProviderConfig::default(),
            grid: GridMetrics::default(),
            granularity: Granularity::Both,
            exec: ExecMode::Parallel,
            debounce: DEFAULT_DEBOUNCE,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

/// Everything a session reacts to.
#[derive(Debug)]
pub enum SessionInput {
    Frame(Vec<u8>),
    Event {
        generation: u64,
        event: ExplanationEvent,
    },
    Closed,
}

struct Active {
    suggestion: Suggestion,
    set: ExplanationSet,
    subject: Subject,
    whole_file: bool,
    hover: Option<usize>,
    cache_key: Option<CacheKey>,
    generation: u64,
    handle: Option<RequestHandle>,
    done: bool,
}

pub struct Session {
    id: String,
    config: SessionConfig,
    pipeline: Pipeline,
    cache: ExplanationCache,
    active: Option<Active>,
    events: Option<mpsc::Sender<SessionInput>>,
    generation: u64,
    closed: bool,
}

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(1);

fn next_session_id() -> String {
    format!(
        "session-{}",
        SESSION_COUNTER.fetch_add(1, Ordering::Relaxed)
    )
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, ProviderError> {
        let provider = provider_from_config(&config.provider)?;
        Ok(Session::with_provider(config, provider))
    }

    pub fn with_provider(config: SessionConfig, provider: Arc<dyn Provider>) -> Self {
        let pipeline = build_pipeline(&config, provider);
        Session {
            id: next_session_id(),
            cache: ExplanationCache::new(config.cache_capacity),
            config,
            pipeline,
            active: None,
            events: None,
            generation: 0,
            closed: false,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Routes pipeline events through `tx` so requests run in the
    /// background. Without a sender every request runs to completion
    /// inside [`Session::handle`].
    pub fn attach(&mut self, tx: mpsc::Sender<SessionInput>) {
        self.events = Some(tx);
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// The current suggestion or file, if any.
    pub fn active_subject(&self) -> Option<&Subject> {
        self.active.as_ref().map(|a| &a.subject)
    }

    pub fn active_set(&self) -> Option<&ExplanationSet> {
        self.active.as_ref().map(|a| &a.set)
    }

    pub fn handle_input(&mut self, input: SessionInput) -> Vec<ServerMessage> {
        match input {
            SessionInput::Frame(bytes) => self.handle_frame(&bytes),
            SessionInput::Event { generation, event } => self.handle_event(generation, event),
            SessionInput::Closed => self.close(),
        }
    }

    pub fn handle_frame(&mut self, bytes: &[u8]) -> Vec<ServerMessage> {
        if self.closed {
            return Vec::new();
        }
        let wire = match decode(bytes) {
            Ok(w) => w,
            Err(e) => {
                return vec![ServerMessage::error(
                    self.session_subject(),
                    ErrorCode::BadPayload,
                    e.to_string(),
                )]
            }
        };
        match ClientMessage::from_wire(&wire) {
            Ok(msg) => self.handle(msg),
            Err(e @ ProtocolError::UnknownType(_)) => {
                vec![ServerMessage::error(
                    self.session_subject(),
                    ErrorCode::UnknownType,
                    e.to_string(),
                )]
            }
            Err(e) => vec![ServerMessage::error(
                self.session_subject(),
                ErrorCode::BadPayload,
                e.to_string(),
            )],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        if self.closed {
            return Vec::new();
        }
        match msg {
            ClientMessage::Hello { .. } => vec![ServerMessage::Ready {
                subject: self.session_subject(),
                protocol_version: PROTOCOL_VERSION,
                server: "ivie".into(),
            }],
            ClientMessage::Configure { provider, grid } => self.configure(provider, grid),
            ClientMessage::SuggestionShown {
                suggestion_id,
                doc_id,
                doc_content_hash,
                anchor_line,
                lines,
                preceding_context,
            } => {
                let subject = Subject::suggestion(&suggestion_id, &doc_id);
                match Suggestion::new(suggestion_id, doc_id, anchor_line, lines, preceding_context)
                {
                    Ok(mut s) => {
                        s.doc_content_hash = doc_content_hash;
                        self.start(s, subject, false)
                    }
                    Err(e) => vec![ServerMessage::error(
                        subject,
                        ErrorCode::BadPayload,
                        e.to_string(),
                    )],
                }
            }
            ClientMessage::SuggestionAccepted { suggestion_id }
            | ClientMessage::SuggestionDismissed { suggestion_id } => {
                let subject = match &self.active {
                    Some(a) if !a.whole_file && a.suggestion.suggestion_id == suggestion_id => {
                        let subject = a.subject.clone();
                        self.stop_active();
                        subject
                    }
                    _ => Subject {
                        suggestion_id: Some(suggestion_id),
                        ..Default::default()
                    },
                };
                vec![ServerMessage::status(subject, StatusState::Idle)]
            }
            ClientMessage::Hover { line } => self.hover(Some(line)),
            ClientMessage::Unhover {} => self.hover(None),
            ClientMessage::ExplainFile {
                doc_id,
                doc_content_hash: _,
                lines,
            } => {
                let subject = Subject::doc(&doc_id);
                match Suggestion::whole_file(doc_id, lines) {
                    Ok(s) => self.start(s, subject, true),
                    Err(e) => vec![ServerMessage::error(
                        subject,
                        ErrorCode::BadPayload,
                        e.to_string(),
                    )],
                }
            }
            ClientMessage::CancelFile { doc_id } => {
                let matches = self
                    .active
                    .as_ref()
                    .is_some_and(|a| a.whole_file && a.suggestion.doc_id == doc_id);
                let state = match matches.then(|| self.stop_active()).flatten() {
                    Some(StatusState::Cancelled) => StatusState::Cancelled,
                    _ => StatusState::Idle,
                };
                vec![ServerMessage::status(Subject::doc(&doc_id), state)]
            }
        }
    }

    /// Folds one background pipeline event into the active suggestion.
    /// Events from superseded requests are dropped.
    pub fn handle_event(&mut self, generation: u64, event: ExplanationEvent) -> Vec<ServerMessage> {
        if self.closed {
            return Vec::new();
        }
        match &self.active {
            Some(a) if a.generation == generation && !a.done => self.on_event(event),
            _ => Vec::new(),
        }
    }

    /// Cancels outstanding work and reports the session closed.
    pub fn close(&mut self) -> Vec<ServerMessage> {
        if self.closed {
            return Vec::new();
        }
        let mut out = Vec::new();
        if let Some(subject) = self.active.as_ref().map(|a| a.subject.clone()) {
            if self.stop_active() == Some(StatusState::Cancelled) {
                out.push(ServerMessage::status(subject, StatusState::Cancelled));
            }
        }
        self.pipeline.cancel_all();
        self.closed = true;
        out.push(ServerMessage::status(
            self.session_subject(),
            StatusState::Closed,
        ));
        out
    }

    fn session_subject(&self) -> Subject {
        Subject::session(&self.id)
    }

    fn configure(
        &mut self,
        provider: Option<ProviderConfig>,
        grid: Option<GridMetrics>,
    ) -> Vec<ServerMessage> {
        let subject = self.session_subject();
        if let Some(g) = &grid {
            if let Err(e) = g.validate() {
                return vec![ServerMessage::error(
                    subject,
                    ErrorCode::BadPayload,
                    e.to_string(),
                )];
            }
        }
        let mut out = Vec::new();
        if let Some(cfg) = provider {
            if let Err(e) = cfg.validate() {
                return vec![ServerMessage::error(
                    subject,
                    ErrorCode::BadPayload,
                    e.to_string(),
                )];
            }
            let p = match provider_from_config(&cfg) {
                Ok(p) => p,
                Err(e) => {
                    return vec![ServerMessage::error(
                        subject,
                        ErrorCode::ProviderUnavailable,
                        e.to_string(),
                    )]
                }
            };
            if let Some(prev) = self.active.as_ref().map(|a| a.subject.clone()) {
                if self.stop_active() == Some(StatusState::Cancelled) {
                    out.push(ServerMessage::status(prev, StatusState::Cancelled));
                }
            }
            self.config.provider = cfg;
            self.pipeline = build_pipeline(&self.config, p);
        }
        if let Some(g) = grid {
            self.config.grid = g;
        }
        out.push(ServerMessage::status(subject, StatusState::Configured));
        out
    }

    /// Stops the active request and clears it. Returns `Cancelled` if work
    /// was still outstanding, `Idle` otherwise.
    fn stop_active(&mut self) -> Option<StatusState> {
        let a = self.active.take()?;
        if let Some(h) = &a.handle {
            h.cancel();
        }
        Some(if a.done {
            StatusState::Idle
        } else {
            StatusState::Cancelled
        })
    }

    fn start(&mut self, s: Suggestion, subject: Subject, whole_file: bool) -> Vec<ServerMessage> {
        let mut out = Vec::new();
        if let Some(prev) = self.active.as_ref().map(|a| a.subject.clone()) {
            if let Some(state) = self.stop_active() {
                out.push(ServerMessage::status(prev, state));
            }
        }
        self.generation += 1;
        let generation = self.generation;
        let cache_key = whole_file.then(|| CacheKey {
            content_hash: s.doc_content_hash.clone(),
            granularity: self.config.granularity,
        });
        let set = ExplanationSet::new(&s.suggestion_id).with_granularity(self.config.granularity);
        self.active = Some(Active {
            suggestion: s.clone(),
            set,
            subject: subject.clone(),
            whole_file,
            hover: None,
            cache_key: cache_key.clone(),
            generation,
            handle: None,
            done: false,
        });
        out.push(ServerMessage::status(subject.clone(), StatusState::Pending));

        if let Some(cached) = cache_key.as_ref().and_then(|k| self.cache.get(k)).cloned() {
            for ev in replay_events(&cached) {
                out.extend(self.on_event(ev));
            }
            return out;
        }

        let background = self
            .events
            .clone()
            .filter(|_| !self.pipeline.provider().is_deterministic());
        let result = match background {
            Some(tx) => self
                .pipeline
                .request_explanations(&s, move |event| {
                    let _ = tx.send(SessionInput::Event { generation, event });
                })
                .map(Some),
            None => self.pipeline.run_to_end(&s).map(|events| {
                for ev in events {
                    out.extend(self.on_event(ev));
                }
                None
            }),
        };
        match result {
            Ok(handle) => {
                if let Some(a) = self.active.as_mut() {
                    a.handle = handle;
                }
            }
            Err(e) => {
                let code = match e {
                    PipelineError::ProviderUnavailable(_) => ErrorCode::ProviderUnavailable,
                    PipelineError::InvalidSuggestion(_) => ErrorCode::BadPayload,
                };
                if let Some(a) = self.active.as_mut() {
                    a.done = true;
                }
                out.push(ServerMessage::error(subject.clone(), code, e.to_string()));
                out.push(ServerMessage::Status {
                    subject,
                    state: StatusState::Failed,
                    detail: None,
                });
            }
        }
        out
    }

    fn hover(&mut self, line: Option<usize>) -> Vec<ServerMessage> {
        let grid = self.config.grid;
        let Some(a) = self.active.as_mut() else {
            return vec![ServerMessage::error(
                self.session_subject(),
                ErrorCode::NoActive,
                "no active suggestion",
            )];
        };
        a.hover = line
            .and_then(|l| l.checked_sub(a.suggestion.anchor_line))
            .filter(|&rel| rel < a.suggestion.lines.len());
        vec![layout_message(a, &grid)]
    }

    fn on_event(&mut self, event: ExplanationEvent) -> Vec<ServerMessage> {
        let grid = self.config.grid;
        let Some(a) = self.active.as_mut() else {
            return Vec::new();
        };
        a.set.apply(&event);
        let subject = a.subject.clone();
        match event {
            ExplanationEvent::ExpressionsReady { line, items } => {
                let doc_line = a.suggestion.anchor_line + line;
                vec![
                    ServerMessage::Expressions {
                        subject,
                        line,
                        doc_line,
                        items,
                    },
                    layout_message(a, &grid),
                ]
            }
            ExplanationEvent::BlockReady { block } => {
                let doc_start_line = a.suggestion.anchor_line + block.start_line;
                vec![
                    ServerMessage::Block {
                        subject,
                        block,
                        doc_start_line,
                    },
                    layout_message(a, &grid),
                ]
            }
            ExplanationEvent::RequestFailed { line, reason } => {
                let message = match line {
                    Some(l) => format!("line {l}: {reason}"),
                    None => format!("blocks: {reason}"),
                };
                vec![ServerMessage::error(
                    subject,
                    ErrorCode::RequestFailed,
                    message,
                )]
            }
            ExplanationEvent::AllDone => {
                a.done = true;
                a.handle = None;
                if a.set.status == SetStatus::Complete {
                    if let Some(k) = a.cache_key.clone() {
                        self.cache.insert(k, a.set.clone());
                    }
                }
                let state = match a.set.status {
                    SetStatus::Complete => StatusState::Complete,
                    SetStatus::Failed => StatusState::Failed,
                    SetStatus::Partial | SetStatus::Pending => StatusState::Partial,
                };
                vec![ServerMessage::status(subject, state)]
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.pipeline.cancel_all();
    }
}

fn build_pipeline(config: &SessionConfig, provider: Arc<dyn Provider>) -> Pipeline {
    let deterministic = provider.is_deterministic();
    let options = PipelineOptions {
        exec: config.exec,
        delivery: if deterministic {
            Delivery::Settled
        } else {
            Delivery::Streaming
        },
        granularity: config.granularity,
        start_delay: if deterministic {
            Duration::ZERO
        } else {
            config.debounce
        },
    };
    Pipeline::new(provider, config.provider.clone()).with_options(options)
}

fn layout_message(a: &Active, grid: &GridMetrics) -> ServerMessage {
    let plan =
        full_layout(&a.suggestion, &a.set, a.hover, grid).expect("set belongs to its suggestion");
    ServerMessage::Layout {
        subject: a.subject.clone(),
        plan,
    }
}

/// The canonical event sequence that rebuilds `set`.
fn replay_events(set: &ExplanationSet) -> Vec<ExplanationEvent> {
    let mut events: Vec<ExplanationEvent> = set
        .blocks
        .iter()
        .map(|b| ExplanationEvent::BlockReady { block: b.clone() })
        .collect();
    events.extend(set.expressions_by_line.iter().map(|(&line, items)| {
        ExplanationEvent::ExpressionsReady {
            line,
            items: items.clone(),
        }
    }));
    events.push(ExplanationEvent::AllDone);
    events
}
