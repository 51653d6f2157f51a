//! Fixed-capacity transition replay with uniform sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: [f64; 4],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; 4],
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    write_pos: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0);
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            write_pos: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.write_pos] = t;
        }
        self.write_pos = (self.write_pos + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng>(&self, rng: &mut R, batch: usize) -> Vec<Transition> {
        assert!(!self.data.is_empty());
        (0..batch)
            .map(|_| self.data[rng.gen_range(0..self.data.len())])
            .collect()
    }
}
