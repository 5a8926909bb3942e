//! Memorizer and state generator.

use std::collections::VecDeque;

/// Network-facing state: `[v history, v′ history, v̄, d histories]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState(pub Vec<f64>);

impl AgentState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Length of the state vector for `history` entries of `rays` distances.
pub fn state_len(history: usize, rays: usize) -> usize {
    2 * history + 1 + history * rays
}

/// FIFO histories of v, v′ and d of length `history`. Only decision-tick
/// measurements are ever pushed.
#[derive(Debug, Clone)]
pub struct Memorizer {
    history: usize,
    v_bar: f64,
    /// Divide v and v̄ by v̄ and d by this range when set.
    normalize: Option<f64>,
    v: VecDeque<f64>,
    v_prime: VecDeque<f64>,
    d: VecDeque<Vec<f64>>,
}

impl Memorizer {
    pub fn new(history: usize, v_bar: f64) -> Self {
        assert!(history >= 1, "memorizer history must be at least 1");
        Self {
            history,
            v_bar,
            normalize: None,
            v: VecDeque::with_capacity(history + 1),
            v_prime: VecDeque::with_capacity(history + 1),
            d: VecDeque::with_capacity(history + 1),
        }
    }

    /// Scale features to O(1): speeds by v̄, distances by `alpha`.
    pub fn normalized(mut self, alpha: f64) -> Self {
        self.normalize = Some(alpha);
        self
    }

    pub fn history(&self) -> usize {
        self.history
    }

    /// Forgets all stored measurements (after a respawn).
    pub fn clear(&mut self) {
        self.v.clear();
        self.v_prime.clear();
        self.d.clear();
    }

    /// Enqueues one measurement set and returns the current state. An empty
    /// memorizer is primed with copies of the first measurement.
    pub fn make_state(&mut self, v: f64, v_prime: f64, d: &[f64]) -> AgentState {
        if self.v.is_empty() {
            for _ in 1..self.history {
                self.v.push_back(v);
                self.v_prime.push_back(v_prime);
                self.d.push_back(d.to_vec());
            }
        }
        self.v.push_back(v);
        self.v_prime.push_back(v_prime);
        self.d.push_back(d.to_vec());
        while self.v.len() > self.history {
            self.v.pop_front();
            self.v_prime.pop_front();
            self.d.pop_front();
        }

        let (speed_scale, dist_scale) = match self.normalize {
            Some(alpha) => (self.v_bar, alpha),
            None => (1.0, 1.0),
        };
        let mut out = Vec::with_capacity(state_len(self.history, d.len()));
        out.extend(self.v.iter().map(|x| x / speed_scale));
        out.extend(self.v_prime.iter().copied());
        out.push(self.v_bar / speed_scale);
        for ds in &self.d {
            out.extend(ds.iter().map(|x| x / dist_scale));
        }
        AgentState(out)
    }
}
