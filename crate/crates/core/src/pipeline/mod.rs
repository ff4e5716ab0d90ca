//! Request fan-out: one expression request per line plus one streamed block
//! request, merged into a single ordered event stream per suggestion.

mod cancel;
mod mock;
mod prompt;
mod provider;
mod remote;
mod reorder;

use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cancel::CancelToken;
pub use mock::{mock_block_segments, mock_segment_line, MockProvider};
pub use prompt::{
    build_block_prompt, build_expression_prompt, Prompt, PromptError, PromptKind, EXAMPLE_MARKER,
};
pub use provider::{provider_from_config, CompletionRequest, Provider, ProviderError};
pub use remote::{RemoteProvider, REQUEST_TIMEOUT};

use crate::anchoring::{
    anchor_segments_detailed, block_from_object, parse_block_payload, parse_expression_payload,
    repair_blocks, ArrayObjectScanner,
};
use crate::exec::{spawn_jobs, ExecMode, Job};
use crate::model::{
    BlockExplanation, ExplanationSet, ExpressionExplanation, Granularity, ModelError,
    ProviderConfig, SetStatus, Suggestion, SuggestionKind, MAX_PRECEDING_CONTEXT,
};
use provider::complete_with_retry;
use reorder::BlockReorder;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ExplanationEvent {
    ExpressionsReady {
        line: usize,
        items: Vec<ExpressionExplanation>,
    },
    BlockReady {
        block: BlockExplanation,
    },
    RequestFailed {
        line: Option<usize>,
        reason: String,
    },
    AllDone,
}

impl ExplanationEvent {
    pub fn is_content(&self) -> bool {
        matches!(
            self,
            ExplanationEvent::ExpressionsReady { .. } | ExplanationEvent::BlockReady { .. }
        )
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(ProviderError),
    #[error("invalid suggestion: {0}")]
    InvalidSuggestion(#[from] ModelError),
}

/// How events reach the consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delivery {
    /// As results arrive; blocks are reorder-buffered into line order.
    #[default]
    Streaming,
    /// Everything at once after all sub-requests settle, in canonical
    /// order: blocks, expressions by line, failures, then `AllDone`.
    Settled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub exec: ExecMode,
    pub delivery: Delivery,
    pub granularity: Granularity,
    /// Wait before issuing requests; cancelling within it avoids all
    /// provider traffic.
    pub start_delay: Duration,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            exec: ExecMode::Parallel,
            delivery: Delivery::Streaming,
            granularity: Granularity::Both,
            start_delay: Duration::ZERO,
        }
    }
}

type Sink = Box<dyn FnMut(ExplanationEvent) + Send + 'static>;

#[derive(Default)]
struct Done {
    finished: Mutex<bool>,
    cv: Condvar,
}

/// Handle to one in-flight request.
pub struct RequestHandle {
    suggestion_id: String,
    token: CancelToken,
    done: Arc<Done>,
}

impl RequestHandle {
    pub fn suggestion_id(&self) -> &str {
        &self.suggestion_id
    }

    pub fn cancel(&self) {
        self.token.cancel();
    }

    pub fn is_finished(&self) -> bool {
        *self.done.finished.lock().unwrap()
    }

    pub fn wait(&self) {
        let mut f = self.done.finished.lock().unwrap();
        while !*f {
            f = self.done.cv.wait(f).unwrap();
        }
    }

    /// Returns `true` if the request settled within `d`.
    pub fn wait_timeout(&self, d: Duration) -> bool {
        let f = self.done.finished.lock().unwrap();
        let (f, _) = self.done.cv.wait_timeout_while(f, d, |f| !*f).unwrap();
        *f
    }
}

/// Iterator over one request's events. Yields nothing once cancelled.
pub struct EventStream {
    rx: mpsc::Receiver<ExplanationEvent>,
    handle: RequestHandle,
}

impl EventStream {
    pub fn handle(&self) -> &RequestHandle {
        &self.handle
    }
}

impl Iterator for EventStream {
    type Item = ExplanationEvent;

    fn next(&mut self) -> Option<ExplanationEvent> {
        let ev = self.rx.recv().ok()?;
        (!self.handle.token.is_cancelled()).then_some(ev)
    }
}

pub struct Pipeline {
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    options: PipelineOptions,
    active: Arc<Mutex<HashMap<String, CancelToken>>>,
}

impl Pipeline {
    pub fn new(provider: Arc<dyn Provider>, config: ProviderConfig) -> Self {
        Pipeline {
            provider,
            config,
            options: PipelineOptions::default(),
            active: Default::default(),
        }
    }

    pub fn from_config(config: ProviderConfig) -> Result<Self, ProviderError> {
        Ok(Pipeline::new(provider_from_config(&config)?, config))
    }

    pub fn with_options(mut self, options: PipelineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn options(&self) -> &PipelineOptions {
        &self.options
    }

    pub fn provider(&self) -> &Arc<dyn Provider> {
        &self.provider
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Starts all sub-requests for `s` and returns immediately. `sink`
    /// receives events one at a time from a single thread; `AllDone` is
    /// last unless the request is cancelled.
    pub fn request_explanations<F>(
        &self,
        s: &Suggestion,
        sink: F,
    ) -> Result<RequestHandle, PipelineError>
    where
        F: FnMut(ExplanationEvent) + Send + 'static,
    {
        s.validate()?;
        self.provider
            .ready()
            .map_err(PipelineError::ProviderUnavailable)?;

        let token = CancelToken::new();
        if let Some(old) = self
            .active
            .lock()
            .unwrap()
            .insert(s.suggestion_id.clone(), token.clone())
        {
            old.cancel();
        }
        let done = Arc::new(Done::default());
        let run = Run {
            suggestion: s.clone(),
            provider: Arc::clone(&self.provider),
            config: self.config.clone(),
            options: self.options,
            token: token.clone(),
        };
        let active = Arc::clone(&self.active);
        let done2 = Arc::clone(&done);
        let id = s.suggestion_id.clone();
        let token2 = token.clone();
        std::thread::Builder::new()
            .name(format!("ivie-coordinator-{id}"))
            .spawn(move || {
                run.coordinate(Box::new(sink));
                let mut map = active.lock().unwrap();
                if map.get(&id).is_some_and(|t| t.ptr_eq(&token2)) {
                    map.remove(&id);
                }
                drop(map);
                *done2.finished.lock().unwrap() = true;
                done2.cv.notify_all();
            })
            .expect("spawn coordinator");
        Ok(RequestHandle {
            suggestion_id: s.suggestion_id.clone(),
            token,
            done,
        })
    }

    pub fn request_stream(&self, s: &Suggestion) -> Result<EventStream, PipelineError> {
        let (tx, rx) = mpsc::channel();
        let handle = self.request_explanations(s, move |ev| {
            let _ = tx.send(ev);
        })?;
        Ok(EventStream { rx, handle })
    }

    /// Runs a request to completion and returns every event in order.
    pub fn run_to_end(&self, s: &Suggestion) -> Result<Vec<ExplanationEvent>, PipelineError> {
        Ok(self.request_stream(s)?.collect())
    }

    /// Runs a request to completion and folds the events into a set.
    pub fn explain(&self, s: &Suggestion) -> Result<ExplanationSet, PipelineError> {
        let mut set =
            ExplanationSet::new(&s.suggestion_id).with_granularity(self.options.granularity);
        for ev in self.run_to_end(s)? {
            set.apply(&ev);
        }
        Ok(set)
    }

    /// Stops delivery for `suggestion_id`. Unknown ids are ignored.
    pub fn cancel(&self, suggestion_id: &str) {
        let token = self.active.lock().unwrap().remove(suggestion_id);
        if let Some(t) = token {
            t.cancel();
        }
    }

    pub fn cancel_all(&self) {
        let tokens: Vec<_> = self
            .active
            .lock()
            .unwrap()
            .drain()
            .map(|(_, t)| t)
            .collect();
        tokens.iter().for_each(CancelToken::cancel);
    }

    pub fn in_flight(&self) -> usize {
        self.active.lock().unwrap().len()
    }
}

impl CancelToken {
    pub(crate) fn ptr_eq(&self, other: &CancelToken) -> bool {
        std::ptr::eq(self.inner_ptr(), other.inner_ptr())
    }
}

enum WorkerMsg {
    Expressions {
        line: usize,
        result: Result<Vec<ExpressionExplanation>, String>,
    },
    BlockPart(BlockExplanation),
    BlockDone(Result<Vec<BlockExplanation>, String>),
}

struct Run {
    suggestion: Suggestion,
    provider: Arc<dyn Provider>,
    config: ProviderConfig,
    options: PipelineOptions,
    token: CancelToken,
}

/// Context lines for an expression prompt on `line`.
fn context_for(s: &Suggestion, line: usize) -> Vec<String> {
    let mut ctx: Vec<String> = s
        .preceding_context
        .iter()
        .chain(&s.lines[..line])
        .cloned()
        .collect();
    let n = ctx.len();
    if n > MAX_PRECEDING_CONTEXT {
        ctx.drain(..n - MAX_PRECEDING_CONTEXT);
    }
    ctx
}

impl Run {
    fn coordinate(self, mut sink: Sink) {
        let s = &self.suggestion;
        let want_blocks =
            self.options.granularity.blocks() && s.kind() == SuggestionKind::MultiLine;
        let want_exprs = self.options.granularity.expressions();
        let expr_lines: Vec<usize> = if want_exprs {
            (0..s.lines.len())
                .filter(|&i| !s.lines[i].trim().is_empty())
                .collect()
        } else {
            Vec::new()
        };
        let blank_lines: Vec<usize> = if want_exprs {
            (0..s.lines.len())
                .filter(|&i| s.lines[i].trim().is_empty())
                .collect()
        } else {
            Vec::new()
        };

        if !self.token.sleep(self.options.start_delay) {
            return;
        }

        let (tx, rx) = mpsc::channel::<WorkerMsg>();
        let mut jobs: Vec<Job> = Vec::new();
        if want_blocks {
            jobs.push(self.block_job(tx.clone()));
        }
        for &line in &expr_lines {
            jobs.push(self.expression_job(line, tx.clone()));
        }
        drop(tx);
        let mut outstanding = jobs.len();
        spawn_jobs(self.options.exec, jobs);

        let token = self.token.clone();
        let mut emit = |ev: ExplanationEvent| token.deliver(|| sink(ev)).is_some();
        let settled = self.options.delivery == Delivery::Settled;
        let mut reorder = BlockReorder::new(&s.lines);
        let mut all_blocks: Vec<BlockExplanation> = Vec::new();
        let mut exprs: BTreeMap<usize, Vec<ExpressionExplanation>> = BTreeMap::new();
        let mut failures: Vec<(Option<usize>, String)> = Vec::new();

        for line in blank_lines {
            if settled {
                exprs.insert(line, Vec::new());
            } else if !emit(ExplanationEvent::ExpressionsReady {
                line,
                items: Vec::new(),
            }) {
                return;
            }
        }

        while outstanding > 0 {
            let msg = match rx.recv_timeout(Duration::from_millis(10)) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => {
                    if self.token.is_cancelled() {
                        return;
                    }
                    continue;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    failures.push((
                        None,
                        format!("{outstanding} sub-requests ended without a result"),
                    ));
                    break;
                }
            };
            if self.token.is_cancelled() {
                return;
            }
            let mut out: Vec<ExplanationEvent> = Vec::new();
            match msg {
                WorkerMsg::Expressions { line, result } => {
                    outstanding -= 1;
                    match result {
                        Ok(items) if settled => {
                            exprs.insert(line, items);
                        }
                        Ok(items) => out.push(ExplanationEvent::ExpressionsReady { line, items }),
                        Err(reason) if settled => failures.push((Some(line), reason)),
                        Err(reason) => out.push(ExplanationEvent::RequestFailed {
                            line: Some(line),
                            reason,
                        }),
                    }
                }
                WorkerMsg::BlockPart(b) => {
                    if settled {
                        all_blocks.push(b);
                    } else {
                        out.extend(
                            reorder
                                .push(b)
                                .into_iter()
                                .map(|block| ExplanationEvent::BlockReady { block }),
                        );
                    }
                }
                WorkerMsg::BlockDone(result) => {
                    outstanding -= 1;
                    match result {
                        Ok(blocks) if settled => all_blocks.extend(blocks),
                        Ok(blocks) => {
                            for b in blocks {
                                out.extend(
                                    reorder
                                        .push(b)
                                        .into_iter()
                                        .map(|block| ExplanationEvent::BlockReady { block }),
                                );
                            }
                            out.extend(
                                reorder
                                    .finish()
                                    .into_iter()
                                    .map(|block| ExplanationEvent::BlockReady { block }),
                            );
                        }
                        Err(reason) if settled => failures.push((None, reason)),
                        Err(reason) => {
                            out.extend(
                                reorder
                                    .finish()
                                    .into_iter()
                                    .map(|block| ExplanationEvent::BlockReady { block }),
                            );
                            out.push(ExplanationEvent::RequestFailed { line: None, reason });
                        }
                    }
                }
            }
            for ev in out {
                if !emit(ev) {
                    return;
                }
            }
        }

        let mut tail: Vec<ExplanationEvent> = Vec::new();
        if settled {
            let blocks = repair_blocks(all_blocks, s.lines.len());
            tail.extend(
                blocks
                    .into_iter()
                    .map(|block| ExplanationEvent::BlockReady { block }),
            );
            tail.extend(
                exprs
                    .into_iter()
                    .map(|(line, items)| ExplanationEvent::ExpressionsReady { line, items }),
            );
            failures.sort_by_key(|(l, _)| l.map_or(usize::MAX, |l| l));
        } else {
            tail.extend(
                reorder
                    .finish()
                    .into_iter()
                    .map(|block| ExplanationEvent::BlockReady { block }),
            );
        }
        tail.extend(
            failures
                .into_iter()
                .map(|(line, reason)| ExplanationEvent::RequestFailed { line, reason }),
        );
        tail.push(ExplanationEvent::AllDone);
        for ev in tail {
            if !emit(ev) {
                return;
            }
        }
    }

    fn expression_job(&self, line: usize, tx: mpsc::Sender<WorkerMsg>) -> Job {
        let provider = Arc::clone(&self.provider);
        let token = self.token.clone();
        let text = self.suggestion.lines[line].clone();
        let context = context_for(&self.suggestion, line);
        let config = self.config.clone();
        Box::new(move || {
            if token.is_cancelled() {
                return;
            }
            let result = (|| {
                let prompt = prompt::build_expression_prompt_for(&text, &context, Some(line))
                    .map_err(|e| e.to_string())?;
                let request = CompletionRequest::new(prompt, &config, false);
                let raw = complete_with_retry(provider.as_ref(), &request, &token, &mut |_| {})
                    .map_err(|e| e.to_string())?;
                let segs = parse_expression_payload(&raw).map_err(|e| e.to_string())?;
                Ok(anchor_segments_detailed(line, &text, &segs).items)
            })();
            let _ = tx.send(WorkerMsg::Expressions { line, result });
        })
    }

    fn block_job(&self, tx: mpsc::Sender<WorkerMsg>) -> Job {
        let provider = Arc::clone(&self.provider);
        let token = self.token.clone();
        let lines = self.suggestion.lines.clone();
        let context = self.suggestion.preceding_context.clone();
        let config = self.config.clone();
        Box::new(move || {
            if token.is_cancelled() {
                return;
            }
            let line_count = lines.len();
            let mut streamed = 0usize;
            let result = (|| {
                let prompt = build_block_prompt(&lines, &context).map_err(|e| e.to_string())?;
                let request = CompletionRequest::new(prompt, &config, config.stream);
                let mut scanner = ArrayObjectScanner::new();
                let mut on_chunk = |chunk: &str| {
                    for obj in scanner.feed(chunk) {
                        if let Some(b) = block_from_object(&obj, line_count) {
                            streamed += 1;
                            let _ = tx.send(WorkerMsg::BlockPart(b));
                        }
                    }
                };
                let raw = complete_with_retry(provider.as_ref(), &request, &token, &mut on_chunk)
                    .map_err(|e| e.to_string())?;
                match parse_block_payload(&raw, line_count) {
                    Ok(blocks) => Ok(blocks),
                    Err(_) if streamed > 0 => Ok(Vec::new()),
                    Err(e) => Err(e.to_string()),
                }
            })();
            let _ = tx.send(WorkerMsg::BlockDone(result));
        })
    }
}

impl ExplanationSet {
    /// Folds one pipeline event into the set.
    pub fn apply(&mut self, ev: &ExplanationEvent) {
        match ev {
            ExplanationEvent::ExpressionsReady { line, items } => {
                self.expressions_by_line.insert(*line, items.clone());
                self.status = SetStatus::Partial;
            }
            ExplanationEvent::BlockReady { block } => {
                self.blocks.push(block.clone());
                self.status = SetStatus::Partial;
            }
            ExplanationEvent::RequestFailed { line, .. } => {
                match line {
                    Some(l) => self.failed_lines.push(*l),
                    None => self.block_failed = true,
                }
                self.status = SetStatus::Partial;
            }
            ExplanationEvent::AllDone => {
                self.blocks_settled = !self.block_failed;
                let failed = self.block_failed || !self.failed_lines.is_empty();
                let has_content = !self.blocks.is_empty() || !self.expressions_by_line.is_empty();
                self.status = match (failed, has_content) {
                    (false, _) => SetStatus::Complete,
                    (true, true) => SetStatus::Partial,
                    (true, false) => SetStatus::Failed,
                };
            }
        }
    }
}
