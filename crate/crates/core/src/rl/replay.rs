//! Experience pool and the flush rule that decides when to empty it.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::Experience;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn flush(&mut self) {
        self.items.clear();
    }

    /// `n` draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Experience> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.items[rng.gen_range(0..self.items.len())].clone())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }
}

/// Before the evaluated success rate first reaches the threshold the pool
/// only accumulates. The first crossing flushes, and after that every epoch
/// that strictly beats the best rate seen so far flushes again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlushPolicy {
    threshold: f64,
    best: Option<f64>,
}

impl FlushPolicy {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            best: None,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Records an epoch's success rate; true when the pool should be flushed.
    pub fn observe(&mut self, success_rate: f64) -> bool {
        match self.best {
            None if success_rate >= self.threshold => {
                self.best = Some(success_rate);
                true
            }
            None => false,
            Some(best) if success_rate > best => {
                self.best = Some(success_rate);
                true
            }
            Some(_) => false,
        }
    }
}
