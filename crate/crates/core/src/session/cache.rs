use std::collections::VecDeque;

use crate::model::{ExplanationSet, Granularity};

pub const DEFAULT_CACHE_CAPACITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub content_hash: String,
    pub granularity: Granularity,
}

/// Least-recently-used store of completed whole-file explanation sets.
#[derive(Debug)]
pub struct ExplanationCache {
    capacity: usize,
    // Most recently used at the back.
    entries: VecDeque<(CacheKey, ExplanationSet)>,
}

impl ExplanationCache {
    pub fn new(capacity: usize) -> Self {
        ExplanationCache {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&mut self, key: &CacheKey) -> Option<&ExplanationSet> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        let entry = self.entries.remove(i)?;
        self.entries.push_back(entry);
        self.entries.back().map(|(_, v)| v)
    }

    pub fn insert(&mut self, key: CacheKey, set: ExplanationSet) {
        if self.capacity == 0 {
            return;
        }
        if let Some(i) = self.entries.iter().position(|(k, _)| *k == key) {
            self.entries.remove(i);
        }
        while self.entries.len() >= self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((key, set));
    }
}

impl Default for ExplanationCache {
    fn default() -> Self {
        ExplanationCache::new(DEFAULT_CACHE_CAPACITY)
    }
}
