//! Data-parallel execution with a sequential fallback.
//!
//! With the `parallel` feature (default) work runs on rayon; without it,
//! or when [`ExecMode::Sequential`] is requested, everything runs in order
//! on one thread.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    /// The mode actually used once the build's features are accounted for.
    pub fn effective(self) -> ExecMode {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecMode::Sequential
        }
    }
}

pub(crate) type Job = Box<dyn FnOnce() + Send + 'static>;

#[cfg(feature = "parallel")]
fn request_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::thread::available_parallelism()
            .map_or(4, |n| n.get())
            .max(8);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("ivie-request-{i}"))
            .build()
            .expect("request pool")
    })
}

#[cfg(not(feature = "parallel"))]
#[allow(dead_code)]
fn request_pool() -> &'static () {
    static POOL: OnceLock<()> = OnceLock::new();
    POOL.get_or_init(|| ())
}

/// Launches provider sub-requests without blocking the caller.
pub(crate) fn spawn_jobs(mode: ExecMode, jobs: Vec<Job>) {
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            let pool = request_pool();
            for job in jobs {
                pool.spawn(job);
            }
        }
        _ => {
            std::thread::Builder::new()
                .name("ivie-request-seq".into())
                .spawn(move || jobs.into_iter().for_each(|job| job()))
                .expect("spawn request thread");
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_items<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}
