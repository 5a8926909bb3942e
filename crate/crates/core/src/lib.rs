//! Deep Q-learning driving agent with an adaptive action-space navigator.
//!
//! A kinematic vehicle drives inside a 2D road corridor and senses the curb
//! through a fan of rays (the circogram). A navigator reads drivable
//! directions off the circogram and restricts steering to the matching
//! block; a Q-network picks among the remaining throttle/steering pairs.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod navigator;
pub mod neural;
pub mod osm;
pub mod rl;
pub mod simulator;
pub mod vehicle;

pub use config::{MapSource, RunConfig, SeedSet};
pub use error::{Error, Result};
pub use geometry::{Point2, Pose, RoadNetwork, RoadNetworkFile, RoadSegmentSpec};
pub use metrics::{DecisionRecord, MetricsRow, MetricsTracker, Summary};
pub use navigator::{AllowedActions, Navigator};
pub use neural::{Adam, AdamParams, Mlp};
pub use rl::{Agent, Policy};
pub use simulator::{Simulator, TickOutput};
pub use vehicle::{Command, VehicleParams, VehicleState};
