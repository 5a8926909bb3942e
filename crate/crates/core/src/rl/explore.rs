//! Exploration schedule and action choice.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::AgentState;
use crate::error::{Error, Result};
use crate::navigator::AllowedActions;
use crate::neural::{Mlp, Workspace};
use crate::vehicle::Command;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSchedule {
    /// Full exploration up to and including this tick.
    pub t0: u64,
    /// Per-tick decay base after `t0`.
    pub base: f64,
}

impl Default for ExploreSchedule {
    fn default() -> Self {
        Self {
            t0: 100_000,
            base: 0.99999,
        }
    }
}

/// `1` for `t <= t0`, then `base^(t − t0)`.
pub fn p_explore(t: u64, schedule: &ExploreSchedule) -> f64 {
    if t <= schedule.t0 {
        1.0
    } else {
        schedule.base.powf((t - schedule.t0) as f64)
    }
}

/// Evaluates Q for one state against many actions in a single batch.
#[derive(Debug, Default)]
pub struct QEvaluator {
    inputs: Vec<f64>,
    q: Vec<f64>,
    ws: Workspace,
}

impl QEvaluator {
    /// Q(state, a) for every action, in order.
    pub fn q_values(&mut self, net: &Mlp, state: &AgentState, actions: &[Command]) -> Result<&[f64]> {
        self.inputs.clear();
        for a in actions {
            self.inputs.extend_from_slice(state.as_slice());
            self.inputs.push(a.u);
            self.inputs.push(a.s);
        }
        self.q.resize(actions.len(), 0.0);
        net.forward_batch(&self.inputs, &mut self.q, &mut self.ws)?;
        Ok(&self.q)
    }

    /// Maximum of Q over many `(state, actions)` groups, evaluated as one batch.
    pub fn max_q_many<'a>(
        &mut self,
        net: &Mlp,
        groups: impl Iterator<Item = (&'a AgentState, &'a [Command])>,
    ) -> Result<Vec<f64>> {
        self.inputs.clear();
        let mut sizes = Vec::new();
        for (state, actions) in groups {
            sizes.push(actions.len());
            for a in actions {
                self.inputs.extend_from_slice(state.as_slice());
                self.inputs.push(a.u);
                self.inputs.push(a.s);
            }
        }
        let total: usize = sizes.iter().sum();
        if total == 0 {
            return Ok(vec![f64::NEG_INFINITY; sizes.len()]);
        }
        self.q.resize(total, 0.0);
        net.forward_batch(&self.inputs, &mut self.q, &mut self.ws)?;
        let mut out = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for n in sizes {
            out.push(self.q[at..at + n].iter().copied().fold(f64::NEG_INFINITY, f64::max));
            at += n;
        }
        Ok(out)
    }
}

/// Index of the first maximum.
pub fn argmax_first(q: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in q.iter().enumerate() {
        if best.is_none_or(|b| x > q[b]) {
            best = Some(i);
        }
    }
    best
}

/// With probability `p` a uniform draw among the allowed actions with positive
/// throttle; otherwise the allowed action with the highest Q (first on ties).
pub fn choose_action(
    state: &AgentState,
    allowed: &AllowedActions,
    net: &Mlp,
    rng: &mut ChaCha8Rng,
    p: f64,
    eval: &mut QEvaluator,
) -> Result<Command> {
    if allowed.is_empty() {
        return Err(Error::Navigator("empty allowed action set"));
    }
    if rng.random::<f64>() < p {
        let forward: Vec<&Command> = allowed.forward_only().collect();
        if forward.is_empty() {
            return Err(Error::Navigator("no allowed action with positive throttle"));
        }
        return Ok(*forward[rng.random_range(0..forward.len())]);
    }
    let q = eval.q_values(net, state, &allowed.pairs)?;
    Ok(allowed.pairs[argmax_first(q).expect("non-empty")])
}
