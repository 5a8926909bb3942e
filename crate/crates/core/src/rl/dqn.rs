//! One-step Q-learning targets and the minibatch update.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::explore::{ExploreSchedule, QEvaluator};
use super::replay::{ReplayBuffer, SarsTuple};
use crate::error::{Error, Result};
use crate::neural::{Adam, Mlp, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub batch: usize,
    /// Tuples that must be stored before the first update.
    pub warmup: usize,
    pub buffer_capacity: usize,
    /// Simulator ticks per decision.
    pub n: usize,
    pub explore: ExploreSchedule,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            batch: 16,
            warmup: 500,
            buffer_capacity: 1000,
            n: 10,
            explore: ExploreSchedule::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("trainer.gamma", "must be in [0, 1)"));
        }
        if self.n < 2 {
            return Err(Error::config("trainer.n", "must be at least 2"));
        }
        if self.batch == 0 {
            return Err(Error::config("trainer.batch", "must be positive"));
        }
        if self.buffer_capacity < self.batch {
            return Err(Error::config("trainer.buffer_capacity", "must hold at least one batch"));
        }
        if self.warmup < self.batch || self.warmup > self.buffer_capacity {
            return Err(Error::config(
                "trainer.warmup",
                "must lie between the batch size and the buffer capacity",
            ));
        }
        if !(self.explore.base > 0.0 && self.explore.base <= 1.0) {
            return Err(Error::config("trainer.explore.base", "must be in (0, 1]"));
        }
        Ok(())
    }
}

/// `r` for terminal tuples, otherwise `r + γ · max_a Q(s', a)` over the
/// stored next-state action set.
pub fn td_target(t: &SarsTuple, net: &Mlp, gamma: f64, eval: &mut QEvaluator) -> Result<f64> {
    if t.terminal {
        return Ok(t.r);
    }
    let q = eval.q_values(net, &t.s_next, &t.allowed_next.pairs)?;
    Ok(t.r + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// [`td_target`] for many tuples with all bootstrap evaluations in one batch.
pub fn td_targets(batch: &[&SarsTuple], net: &Mlp, gamma: f64, eval: &mut QEvaluator) -> Result<Vec<f64>> {
    let live: Vec<&SarsTuple> = batch.iter().copied().filter(|t| !t.terminal).collect();
    let maxes = eval.max_q_many(
        net,
        live.iter().map(|t| (&t.s_next, t.allowed_next.pairs.as_slice())),
    )?;
    let mut maxes = maxes.into_iter();
    Ok(batch
        .iter()
        .map(|t| {
            if t.terminal {
                t.r
            } else {
                t.r + gamma * maxes.next().expect("one max per live tuple")
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainOutcome {
    /// The buffer has not reached the warm-up size; nothing was done.
    WarmingUp,
    /// One update was applied; `loss` is the batch MSE before the update.
    Trained { loss: f64 },
}

impl TrainOutcome {
    pub fn loss(&self) -> Option<f64> {
        match self {
            TrainOutcome::WarmingUp => None,
            TrainOutcome::Trained { loss } => Some(*loss),
        }
    }
}

/// Scratch state reused across updates.
#[derive(Debug, Default)]
pub struct TrainScratch {
    pub eval: QEvaluator,
    ws: Workspace,
    inputs: Vec<f64>,
}

pub fn train_step(
    net: &mut Mlp,
    adam: &mut Adam,
    buffer: &ReplayBuffer,
    cfg: &TrainerConfig,
    rng: &mut ChaCha8Rng,
    scratch: &mut TrainScratch,
) -> Result<TrainOutcome> {
    if buffer.len() < cfg.warmup {
        return Ok(TrainOutcome::WarmingUp);
    }
    let batch = buffer.sample(cfg.batch, rng)?;
    let targets = td_targets(&batch, net, cfg.gamma, &mut scratch.eval)?;
    scratch.inputs.clear();
    for t in &batch {
        scratch.inputs.extend_from_slice(t.s.as_slice());
        scratch.inputs.push(t.a.u);
        scratch.inputs.push(t.a.s);
    }
    let (loss, grads) = net.backward(&scratch.inputs, &targets, &mut scratch.ws)?;
    adam.step(net, &grads)?;
    Ok(TrainOutcome::Trained { loss })
}
