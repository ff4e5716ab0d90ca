//! Fakes and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use ivie_core::layout::LabelBox;
use ivie_core::pipeline::{
    mock_block_segments, CancelToken, CompletionRequest, MockProvider, PromptKind, Provider,
    ProviderError,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

/// Wraps the mock with random latency, call counting, optional failures
/// and shuffled, trickled block streaming.
pub struct FakeProvider {
    pub calls: AtomicUsize,
    pub expression_calls: AtomicUsize,
    pub block_calls: AtomicUsize,
    rng: Mutex<StdRng>,
    max_latency_ms: u64,
    fail_lines: BTreeSet<usize>,
    fail_blocks: bool,
    shuffle_blocks: bool,
    deterministic: bool,
}

impl FakeProvider {
    pub fn new(seed: u64, max_latency_ms: u64) -> Self {
        FakeProvider {
            calls: AtomicUsize::new(0),
            expression_calls: AtomicUsize::new(0),
            block_calls: AtomicUsize::new(0),
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
            max_latency_ms,
            fail_lines: BTreeSet::new(),
            fail_blocks: false,
            shuffle_blocks: true,
            deterministic: false,
        }
    }

    /// No latency, in-order output, and reported as deterministic.
    pub fn counting() -> Self {
        let mut f = FakeProvider::new(0, 0);
        f.shuffle_blocks = false;
        f.deterministic = true;
        f
    }

    pub fn failing_lines(mut self, lines: impl IntoIterator<Item = usize>) -> Self {
        self.fail_lines = lines.into_iter().collect();
        self
    }

    pub fn failing_blocks(mut self) -> Self {
        self.fail_blocks = true;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn latency(&self) -> Duration {
        if self.max_latency_ms == 0 {
            return Duration::ZERO;
        }
        Duration::from_micros(
            self.rng
                .lock()
                .unwrap()
                .gen_range(0..self.max_latency_ms * 1000),
        )
    }
}

impl Provider for FakeProvider {
    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = &request.prompt;
        match prompt.kind {
            PromptKind::ExpressionLevel => {
                self.expression_calls.fetch_add(1, Ordering::SeqCst);
                if !cancel.sleep(self.latency()) {
                    return Err(ProviderError::Cancelled);
                }
                if prompt
                    .target_line
                    .is_some_and(|l| self.fail_lines.contains(&l))
                {
                    return Err(ProviderError::Http {
                        status: 400,
                        body: "rejected".into(),
                    });
                }
                MockProvider.complete(request, cancel, on_chunk)
            }
            PromptKind::BlockLevel => {
                self.block_calls.fetch_add(1, Ordering::SeqCst);
                if self.fail_blocks {
                    if !cancel.sleep(self.latency()) {
                        return Err(ProviderError::Cancelled);
                    }
                    return Err(ProviderError::Http {
                        status: 400,
                        body: "rejected".into(),
                    });
                }
                let mut blocks = mock_block_segments(&prompt.code)
                    .map_err(|e| ProviderError::Malformed(e.to_string()))?;
                if self.shuffle_blocks {
                    blocks.shuffle(&mut *self.rng.lock().unwrap());
                }
                let mut full = String::from("[");
                if request.stream {
                    on_chunk("[");
                }
                for (i, b) in blocks.iter().enumerate() {
                    if !cancel.sleep(self.latency()) {
                        return Err(ProviderError::Cancelled);
                    }
                    let obj = json!({"startLine": b.start_line, "endLine": b.end_line, "explanation": b.text});
                    let piece = format!("{}{}", if i > 0 { ", " } else { "" }, obj);
                    if request.stream {
                        on_chunk(&piece);
                    }
                    full.push_str(&piece);
                }
                full.push(']');
                if request.stream {
                    on_chunk("]");
                }
                Ok(full)
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        self.deterministic
    }
}

/// Never answers until cancelled.
#[derive(Default)]
pub struct StallingProvider {
    pub calls: AtomicUsize,
}

impl Provider for StallingProvider {
    fn complete(
        &self,
        _request: &CompletionRequest,
        cancel: &CancelToken,
        _on_chunk: &mut dyn FnMut(&str),
    ) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        while cancel.sleep(Duration::from_millis(5)) {}
        Err(ProviderError::Cancelled)
    }
}

pub fn arc<P: Provider + 'static>(p: P) -> (Arc<P>, Arc<dyn Provider>) {
    let a = Arc::new(p);
    let d: Arc<dyn Provider> = a.clone();
    (a, d)
}

/// Brute-force anchoring: enumerate every substring of the line in
/// (start, end) order and take the first acceptable one per stage.
pub fn oracle_anchor(line: &str, segs: &[(String, String)]) -> Vec<(usize, usize)> {
    let chars: Vec<char> = line.chars().collect();
    let n = chars.len();
    let sub = |s: usize, e: usize| -> String { chars[s..e].iter().collect() };
    let mut cursor = 0;
    let mut out = Vec::new();
    for (seg, expl) in segs {
        if seg.trim().is_empty() || expl.split_whitespace().next().is_none() {
            continue;
        }
        let trimmed = seg.trim();
        let squeezed: String = seg.chars().filter(|c| !c.is_whitespace()).collect();
        let stages: [&dyn Fn(usize, usize) -> bool; 3] = [
            &|s, e| sub(s, e) == *seg,
            &|s, e| sub(s, e) == trimmed,
            &|s, e| {
                !chars[s].is_whitespace()
                    && !chars[e - 1].is_whitespace()
                    && sub(s, e)
                        .chars()
                        .filter(|c| !c.is_whitespace())
                        .collect::<String>()
                        == squeezed
            },
        ];
        let found = stages.iter().find_map(|accept| {
            (cursor..n).find_map(|s| ((s + 1)..=n).find(|&e| accept(s, e)).map(|e| (s, e)))
        });
        if let Some((s, e)) = found {
            out.push((s, e));
            cursor = e;
        }
    }
    out
}

/// Every pair of labels shares no grid cell.
pub fn cells_disjoint(labels: &[LabelBox]) -> bool {
    let mut seen = HashSet::new();
    for l in labels {
        for r in l.row..l.row + l.height_rows {
            for c in l.col..l.col + l.width_cols {
                if !seen.insert((r, c)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Leader present exactly when less than half the label overlaps its span.
pub fn leader_rule_holds(label: &LabelBox, span_start: usize, span_end: usize) -> bool {
    let lo = label.col.max(span_start) as f64;
    let hi = ((label.col + label.width_cols).min(span_end)) as f64;
    let ratio = (hi - lo).max(0.0) / label.width_cols as f64;
    label.leader.is_some() == (ratio < 0.5)
}

pub fn lines(src: &[&str]) -> Vec<String> {
    src.iter().map(|s| s.to_string()).collect()
}

use std::collections::HashMap;
use std::sync::mpsc;
use std::time::Instant;

use ivie_core::session::{
    ClientMessage, ServerMessage, Session, SessionConfig, SessionInput, StatusState,
};

/// Feeds pipeline events into the session for `d`, collecting output.
pub fn pump(
    session: &mut Session,
    rx: &mpsc::Receiver<SessionInput>,
    d: Duration,
    log: &mut Vec<ServerMessage>,
) {
    let deadline = Instant::now() + d;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(left) {
            Ok(input) => log.extend(session.handle_input(input)),
            Err(_) => return,
        }
    }
}

pub fn shown(id: &str, doc: &str, anchor: usize, code: &[String]) -> ClientMessage {
    ClientMessage::SuggestionShown {
        suggestion_id: id.into(),
        doc_id: doc.into(),
        doc_content_hash: String::new(),
        anchor_line: anchor,
        lines: code.to_vec(),
        preceding_context: Vec::new(),
    }
}

const FUZZ_LINES: &[&str] = &[
    "img = cv2.GaussianBlur(img, (5, 5), 0)",
    "edges = cv2.Canny(img, 100, 200)",
    "plt.imshow(edges, cmap='gray')",
    "total += price * qty",
    "",
    "print(f\"{x}, done\")",
];

/// Checks that no content message names a suggestion after it was
/// cancelled, dismissed or superseded. Returns the number of content
/// messages seen.
pub fn check_dismissal_finality(log: &[ServerMessage]) -> Result<usize, String> {
    let mut dead: HashMap<String, usize> = HashMap::new();
    let mut live: Option<String> = None;
    let mut content = 0;
    for (i, m) in log.iter().enumerate() {
        let id = m.subject().suggestion_id.clone();
        match m {
            ServerMessage::Status {
                state: StatusState::Pending,
                ..
            } => {
                if let Some(old) = live.replace(id.clone().unwrap_or_default()) {
                    dead.entry(old).or_insert(i);
                }
            }
            ServerMessage::Status {
                state: StatusState::Idle | StatusState::Cancelled,
                ..
            } => {
                if let Some(id) = id {
                    dead.entry(id.clone()).or_insert(i);
                    if live.as_ref() == Some(&id) {
                        live = None;
                    }
                }
            }
            m if m.is_content() => {
                content += 1;
                let id = id.ok_or_else(|| format!("message {i} has no suggestionId"))?;
                if let Some(at) = dead.get(&id) {
                    return Err(format!("content for {id} at {i} after it ended at {at}"));
                }
                if live.as_ref() != Some(&id) {
                    return Err(format!("content for {id} at {i} while {live:?} is active"));
                }
            }
            _ => {}
        }
    }
    Ok(content)
}

/// One random interleaving of shows, dismissals, hovers and provider
/// progress against a latency-injecting fake.
pub fn cancellation_schedule(seed: u64) -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let (_, p) = arc(FakeProvider::new(seed, 3));
    let cfg = SessionConfig {
        debounce: Duration::from_millis(rng.gen_range(0..3)),
        ..SessionConfig::default()
    };
    let mut session = Session::with_provider(cfg, p);
    let (tx, rx) = mpsc::channel();
    session.attach(tx);
    let mut log = Vec::new();
    let mut current: Option<String> = None;
    let mut next = 0;
    for _ in 0..rng.gen_range(3..10) {
        match rng.gen_range(0..10) {
            0..=3 => {
                next += 1;
                let id = format!("s{next}");
                let n = rng.gen_range(1..4);
                let code: Vec<String> = (0..n)
                    .map(|_| FUZZ_LINES[rng.gen_range(0..FUZZ_LINES.len())].to_string())
                    .collect();
                let code = if code.iter().all(|l| l.is_empty()) {
                    vec!["x = 1".to_string()]
                } else {
                    code
                };
                log.extend(session.handle(shown(&id, "doc", rng.gen_range(0..5), &code)));
                current = Some(id);
            }
            4 | 5 => {
                let id = if rng.gen_bool(0.8) {
                    current.clone()
                } else {
                    Some(format!("s{}", rng.gen_range(0..=next)))
                };
                if let Some(id) = id {
                    log.extend(
                        session.handle(ClientMessage::SuggestionDismissed { suggestion_id: id }),
                    );
                }
            }
            6 => {
                if let Some(id) = current.clone() {
                    log.extend(
                        session.handle(ClientMessage::SuggestionAccepted { suggestion_id: id }),
                    );
                }
            }
            7 => log.extend(session.handle(ClientMessage::Hover {
                line: rng.gen_range(0..8),
            })),
            _ => pump(
                &mut session,
                &rx,
                Duration::from_micros(rng.gen_range(0..4000)),
                &mut log,
            ),
        }
    }
    if let Some(id) = current {
        log.extend(session.handle(ClientMessage::SuggestionDismissed { suggestion_id: id }));
    }
    pump(&mut session, &rx, Duration::from_millis(8), &mut log);
    check_dismissal_finality(&log)
}

/// Runs `count` schedules on several threads; returns total content
/// messages or the first violation.
pub fn run_cancellation_fuzz(count: u64) -> Result<usize, String> {
    let threads = 8;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    let mut total = 0;
                    for seed in (t..count).step_by(threads as usize) {
                        total +=
                            cancellation_schedule(seed).map_err(|e| format!("seed {seed}: {e}"))?;
                    }
                    Ok::<usize, String>(total)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    })
}
