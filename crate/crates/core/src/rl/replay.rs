//! Experience replay.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::state::AgentState;
use crate::error::{Error, Result};
use crate::navigator::AllowedActions;
use crate::vehicle::Command;

/// One stored transition plus the collision flag and the action set that was
/// available in the next state.
#[derive(Debug, Clone, PartialEq)]
pub struct SarsTuple {
    pub s: AgentState,
    pub a: Command,
    pub r: f64,
    pub s_next: AgentState,
    pub terminal: bool,
    pub allowed_next: AllowedActions,
}

/// Bounded FIFO ring; the oldest tuple is evicted when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<SarsTuple>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity),
            capacity,
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

    pub fn push(&mut self, t: SarsTuple) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &SarsTuple> {
        self.items.iter()
    }

    /// `batch` uniform draws with replacement.
    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&SarsTuple>> {
        if self.items.len() < batch || self.items.is_empty() {
            return Err(Error::BufferTooSmall {
                len: self.items.len(),
                batch,
            });
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}
