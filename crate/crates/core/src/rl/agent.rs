//! The closed agent loop: sense, restrict, choose, sequence, learn.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dqn::{train_step, TrainScratch, TrainerConfig};
use super::explore::{choose_action, p_explore, QEvaluator};
use super::replay::{ReplayBuffer, SarsTuple};
use super::reward::{reward, RewardParams};
use super::sequencer::Sequence;
use super::state::{AgentState, Memorizer};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::RoadNetwork;
use crate::metrics::DecisionRecord;
use crate::navigator::{AllowedActions, Navigator};
use crate::neural::{Adam, Mlp};
use crate::simulator::{Simulator, TickOutput};
use crate::vehicle::Command;

/// How actions are chosen at decision ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Scheduled exploration, transitions stored and trained on.
    Learn,
    /// Always the highest-Q allowed action; no training.
    Greedy,
    /// Always a uniform forward action; no training.
    Random,
}

/// The open transition awaiting its reward and next state.
#[derive(Debug, Clone)]
struct Pending {
    s: AgentState,
    a: Command,
    /// Yaw rate measured at the decision that opened the transition.
    v_prime: f64,
    decision: u64,
    p: f64,
}

/// What happened during one tick.
#[derive(Debug, Clone, Default)]
pub struct TickEvent {
    /// The action chosen at this tick, if it was a decision tick.
    pub decided: Option<Command>,
    /// Transitions closed during this tick: at most one at the decision and
    /// one at a collision.
    pub finalized: Vec<DecisionRecord>,
}

pub struct Agent {
    sim: Simulator,
    navigator: Navigator,
    net: Mlp,
    adam: Adam,
    buffer: ReplayBuffer,
    memorizer: Memorizer,
    reward_params: RewardParams,
    trainer: TrainerConfig,
    policy: Policy,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    eval: QEvaluator,
    scratch: TrainScratch,
    pending: Option<Pending>,
    sequence: Sequence,
    prev_action: Command,
    decisions: u64,
}

impl Agent {
    /// Assembles an agent around an existing network; all random streams are
    /// seeded from `cfg.seed`.
    pub fn new(cfg: &RunConfig, roads: Arc<RoadNetwork>, net: Mlp, adam: Option<Adam>, policy: Policy) -> Result<Self> {
        cfg.validate()?;
        let dims = cfg.network_dims();
        if net.dims() != dims {
            return Err(Error::ShapeMismatch(format!(
                "network has dims {:?}, configuration expects {:?}",
                net.dims(),
                dims
            )));
        }
        let seeds = cfg.seeds();
        let sim = Simulator::new(roads, cfg.vehicle, cfg.sim_config(seeds.sim))?;
        let navigator = Navigator::new(cfg.navigator, cfg.sensor.alpha, ChaCha8Rng::seed_from_u64(seeds.navigator));
        let mut memorizer = Memorizer::new(cfg.agent.history, cfg.reward.v_bar);
        if cfg.agent.normalize_inputs {
            memorizer = memorizer.normalized(cfg.sensor.alpha);
        }
        let adam = adam.unwrap_or_else(|| Adam::new(&net, cfg.adam));
        Ok(Self {
            sim,
            navigator,
            adam,
            net,
            buffer: ReplayBuffer::new(cfg.trainer.buffer_capacity),
            memorizer,
            reward_params: cfg.reward,
            trainer: cfg.trainer,
            policy,
            explore_rng: ChaCha8Rng::seed_from_u64(seeds.explorer),
            sample_rng: ChaCha8Rng::seed_from_u64(seeds.sampler),
            eval: QEvaluator::default(),
            scratch: TrainScratch::default(),
            pending: None,
            sequence: Sequence::default(),
            prev_action: Command::default(),
            decisions: 0,
        })
    }

    /// Builds the map and a freshly initialized network from the config.
    pub fn from_config(cfg: &RunConfig, policy: Policy) -> Result<Self> {
        cfg.validate()?;
        let roads = Arc::new(cfg.build_network()?);
        let net = Mlp::new(
            &cfg.network_dims(),
            cfg.network.negative_slope,
            cfg.network.init_std,
            cfg.seeds().init,
        )?;
        Self::new(cfg, roads, net, None, policy)
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn memorizer(&self) -> &Memorizer {
        &self.memorizer
    }

    pub fn navigator(&self) -> &Navigator {
        &self.navigator
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn ticks(&self) -> u64 {
        self.sim.ticks()
    }

    /// Decisions taken so far.
    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    fn explore_probability(&self) -> f64 {
        match self.policy {
            Policy::Learn => p_explore(self.sim.ticks(), &self.trainer.explore),
            Policy::Greedy => 0.0,
            Policy::Random => 1.0,
        }
    }

    fn close(&mut self, pending: Pending, s_next: AgentState, allowed_next: AllowedActions, out: &TickOutput) -> Result<DecisionRecord> {
        let r = reward(pending.v_prime, out.v, out.v_prime, &out.d, out.c, &self.reward_params);
        let mut loss = None;
        if self.policy == Policy::Learn {
            self.buffer.push(SarsTuple {
                s: pending.s,
                a: pending.a,
                r,
                s_next,
                terminal: out.c,
                allowed_next,
            });
            loss = train_step(
                &mut self.net,
                &mut self.adam,
                &self.buffer,
                &self.trainer,
                &mut self.sample_rng,
                &mut self.scratch,
            )?
            .loss();
        }
        Ok(DecisionRecord {
            tick: self.sim.ticks(),
            decision: pending.decision,
            reward: r,
            p_explore: pending.p,
            collision: out.c,
            v: out.v,
            loss,
        })
    }

    /// Decision tick: closes the open transition at the new state, then
    /// chooses the next action and builds its command ramp.
    fn decide(&mut self, event: &mut TickEvent) -> Result<()> {
        let out = self.sim.observe();
        let s = self.memorizer.make_state(out.v, out.v_prime, &out.d);
        let allowed = self.navigator.allowed_actions(&out.d)?;
        if let Some(pending) = self.pending.take() {
            let record = self.close(pending, s.clone(), allowed.clone(), &out)?;
            event.finalized.push(record);
        }
        let p = self.explore_probability();
        let a = choose_action(&s, &allowed, &self.net, &mut self.explore_rng, p, &mut self.eval)?;
        self.sequence = Sequence::new(self.prev_action, a, self.trainer.n);
        self.prev_action = a;
        self.pending = Some(Pending {
            s,
            a,
            v_prime: out.v_prime,
            decision: self.decisions,
            p,
        });
        self.decisions += 1;
        event.decided = Some(a);
        Ok(())
    }

    /// Collision: the open transition ends as terminal at the colliding state
    /// and every per-episode memory is reset.
    fn collide(&mut self, out: TickOutput) -> Result<Option<DecisionRecord>> {
        let mut record = None;
        if let Some(pending) = self.pending.take() {
            let mut scratch = self.memorizer.clone();
            let s_next = scratch.make_state(out.v, out.v_prime, &out.d);
            let allowed_next = self.navigator.peek_allowed_actions(&out.d)?;
            record = Some(self.close(pending, s_next, allowed_next, &out)?);
        }
        self.memorizer.clear();
        self.navigator.reset();
        self.prev_action = Command::default();
        self.sequence = Sequence::default();
        Ok(record)
    }

    /// Advances one simulator tick.
    pub fn step(&mut self) -> Result<TickEvent> {
        let mut event = TickEvent::default();
        if self.sequence.remaining() == 0 {
            self.decide(&mut event)?;
        }
        let cmd = self.sequence.next().expect("sequence refilled at decision ticks");
        if let Some(out) = self.sim.advance(cmd) {
            event.finalized.extend(self.collide(out)?);
        }
        Ok(event)
    }

    /// Runs `ticks` ticks, handing every closed transition to `sink`.
    pub fn run(&mut self, ticks: u64, mut sink: impl FnMut(&Self, DecisionRecord) -> Result<()>) -> Result<()> {
        for _ in 0..ticks {
            for record in self.step()?.finalized {
                sink(self, record)?;
            }
        }
        Ok(())
    }
}
