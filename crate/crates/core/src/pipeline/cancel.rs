use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::ReentrantMutex;

#[derive(Debug, Default)]
struct Inner {
    cancelled: AtomicBool,
    gate: ReentrantMutex<()>,
}

/// Shared cancellation flag. Event delivery runs under the token's gate, so
/// once [`CancelToken::cancel`] returns no further delivery can start.
#[derive(Debug, Clone, Default)]
pub struct CancelToken {
    inner: Arc<Inner>,
}

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.inner.cancelled.store(true, Ordering::SeqCst);
        // Wait out any delivery in progress on another thread.
        drop(self.inner.gate.lock());
    }

    pub fn is_cancelled(&self) -> bool {
        self.inner.cancelled.load(Ordering::SeqCst)
    }

    /// Runs `f` unless cancelled.
    pub fn deliver<R>(&self, f: impl FnOnce() -> R) -> Option<R> {
        let _gate = self.inner.gate.lock();
        if self.is_cancelled() {
            None
        } else {
            Some(f())
        }
    }

    pub(crate) fn inner_ptr(&self) -> *const () {
        Arc::as_ptr(&self.inner) as *const ()
    }

    /// Sleeps for `d` in short slices. Returns `false` if cancelled first.
    pub fn sleep(&self, d: Duration) -> bool {
        let deadline = Instant::now() + d;
        loop {
            if self.is_cancelled() {
                return false;
            }
            let now = Instant::now();
            if now >= deadline {
                return true;
            }
            std::thread::sleep((deadline - now).min(Duration::from_millis(5)));
        }
    }
}
