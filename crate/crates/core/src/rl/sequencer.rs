//! Linear command ramps between consecutive decisions.

use crate::vehicle::Command;

/// `n` values from `from` to `to` in equal steps; both endpoints exact.
pub fn interpolate(from: f64, to: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a ramp needs at least two points");
    let step = (to - from) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|k| from + step * k as f64).collect();
    out[n - 1] = to;
    out
}

/// Per-tick commands ramping from the previous to the current action.
#[derive(Debug, Clone, Default)]
pub struct Sequence {
    throttle: Vec<f64>,
    steering: Vec<f64>,
    next: usize,
}

impl Sequence {
    pub fn new(prev: Command, cur: Command, n: usize) -> Self {
        Self {
            throttle: interpolate(prev.u, cur.u, n),
            steering: interpolate(prev.s, cur.s, n),
            next: 0,
        }
    }

    pub fn throttle(&self) -> &[f64] {
        &self.throttle
    }

    pub fn steering(&self) -> &[f64] {
        &self.steering
    }

    pub fn remaining(&self) -> usize {
        self.throttle.len() - self.next
    }
}

impl Iterator for Sequence {
    type Item = Command;

    fn next(&mut self) -> Option<Command> {
        let i = self.next;
        if i >= self.throttle.len() {
            return None;
        }
        self.next += 1;
        Some(Command::new(self.throttle[i], self.steering[i]))
    }
}
