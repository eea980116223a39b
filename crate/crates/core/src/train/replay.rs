use std::collections::VecDeque;

use crate::env::Observation;
use crate::rng::SplitMix64;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub terminal: bool,
}

/// Fixed-capacity FIFO store with uniform sampling (with replacement).
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: VecDeque<T>,
    rng: SplitMix64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng: SplitMix64::new(seed),
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

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `n` uniform draws; empty buffer yields an empty batch.
    pub fn sample(&mut self, n: usize) -> Vec<&T> {
        if self.items.is_empty() {
            return Vec::new();
        }
        let len = self.items.len();
        let idx: Vec<usize> = (0..n).map(|_| self.rng.bounded(len)).collect();
        idx.into_iter().map(|i| &self.items[i]).collect()
    }
}
