//! Deep Q-learning on top of the navigator's restricted action sets.

pub mod agent;
pub mod dqn;
pub mod explore;
pub mod replay;
pub mod reward;
pub mod sequencer;
pub mod state;

pub use agent::{Agent, Policy, TickEvent};
pub use dqn::{td_target, td_targets, train_step, TrainOutcome, TrainScratch, TrainerConfig};
pub use explore::{argmax_first, choose_action, p_explore, ExploreSchedule, QEvaluator};
pub use replay::{ReplayBuffer, SarsTuple};
pub use reward::{deviations, reward, shaped, RewardParams};
pub use sequencer::{interpolate, Sequence};
pub use state::{state_len, AgentState, Memorizer};
