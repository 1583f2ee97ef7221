//! Bounded FIFO experience replay with uniform without-replacement batch
//! sampling.

use std::collections::VecDeque;

use rand::seq::index::sample as index_sample;

use crate::seed::Rng;

/// One stored interaction: flattened states, the branch action pair, the
/// (scaled) reward, and the terminal flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: (usize, usize),
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    buf: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { buf: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Uniform sample of `batch` distinct transitions (all of them if the
    /// buffer is smaller).
    pub fn sample<'a>(&'a self, batch: usize, rng: &mut Rng) -> Vec<&'a Transition> {
        let n = self.buf.len().min(batch);
        if n == 0 {
            return Vec::new();
        }
        index_sample(rng, self.buf.len(), n).iter().map(|i| &self.buf[i]).collect()
    }
}
