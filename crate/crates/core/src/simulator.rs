//! Fixed-tick world: vehicle physics, circogram sensing, collisions and respawn.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, RoadNetwork};
use crate::vehicle::{self, footprint, Command, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorParams {
    /// Maximum ray length (m).
    pub alpha: f64,
    /// Angle from the leftmost to the rightmost ray (degrees).
    pub beta: f64,
    pub ray_count: usize,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            alpha: 12.0,
            beta: 180.0,
            ray_count: 25,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        if self.ray_count < 2 {
            return Err(Error::config("sensor.ray_count", "must be at least 2"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("sensor.alpha", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta <= 360.0) {
            return Err(Error::config("sensor.beta", "must be in (0, 360]"));
        }
        Ok(())
    }

    /// Angle of ray `i` (0-based) relative to the heading; ray 0 is leftmost.
    /// Offsets are exactly antisymmetric: `offset(i) == -offset(n-1-i)`.
    pub fn ray_offset(&self, i: usize) -> f64 {
        let n1 = (self.ray_count - 1) as f64;
        let half = self.beta.to_radians() / 2.0;
        half * (n1 - 2.0 * i as f64) / n1
    }
}

/// The four measurements delivered every tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub v: f64,
    pub v_prime: f64,
    pub d: Vec<f64>,
    pub c: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub sensor: SensorParams,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            sensor: SensorParams::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("sim.dt", "must be positive"));
        }
        self.sensor.validate()
    }
}

/// Curb distances from the vehicle center, leftmost ray first.
pub fn circogram(state: &VehicleState, net: &RoadNetwork, sp: &SensorParams) -> Result<Vec<f64>> {
    (0..sp.ray_count)
        .map(|i| {
            net.raycast(
                state.pose.position,
                state.pose.heading + sp.ray_offset(i),
                sp.alpha,
            )
        })
        .collect()
}

/// True when every footprint probe lies inside the corridor.
pub fn footprint_inside(state: &VehicleState, net: &RoadNetwork, params: &VehicleParams) -> bool {
    footprint(state, params).iter().all(|&p| net.clearance(p) >= 0.0)
}

pub struct Simulator {
    net: Arc<RoadNetwork>,
    params: VehicleParams,
    config: SimConfig,
    state: VehicleState,
    rng: ChaCha8Rng,
    ticks: u64,
}

impl Simulator {
    /// Places the vehicle on a random spawn. Fails if the network has no
    /// spawns or any spawn would already collide.
    pub fn new(net: Arc<RoadNetwork>, params: VehicleParams, config: SimConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if net.spawns().is_empty() {
            return Err(Error::InvalidNetwork("network has no spawns".into()));
        }
        for (i, s) in net.spawns().iter().enumerate() {
            if !footprint_inside(&VehicleState::at_rest(*s), &net, &params) {
                return Err(Error::InvalidNetwork(format!(
                    "spawn {i}: vehicle footprint leaves the corridor"
                )));
            }
        }
        let mut sim = Self {
            net,
            params,
            config,
            state: VehicleState::default(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            ticks: 0,
        };
        sim.respawn();
        Ok(sim)
    }

    fn respawn(&mut self) {
        let spawns = self.net.spawns();
        let i = self.rng.random_range(0..spawns.len());
        self.state = VehicleState::at_rest(spawns[i]);
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.net
    }

    pub fn vehicle_params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    /// Overrides the vehicle state (used for scripted scenarios).
    pub fn set_state(&mut self, state: VehicleState) {
        self.state = state;
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.config.dt
    }

    fn measure(&self, state: &VehicleState, collided: bool) -> TickOutput {
        let sp = &self.config.sensor;
        // a center already past the curb has no circogram; report zero range
        let d = circogram(state, &self.net, sp).unwrap_or_else(|_| vec![0.0; sp.ray_count]);
        TickOutput {
            v: state.v,
            v_prime: state.yaw_rate,
            d,
            c: collided,
        }
    }

    /// Measurements at the current state, without advancing time.
    pub fn observe(&self) -> TickOutput {
        self.measure(&self.state, false)
    }

    /// Advances one tick. On collision the returned measurements describe the
    /// colliding state and the vehicle is already respawned.
    pub fn tick(&mut self, cmd: Command) -> TickOutput {
        match self.advance(cmd) {
            Some(out) => out,
            None => self.observe(),
        }
    }

    /// Advances one tick without sensing. Returns the collision measurements
    /// when the vehicle hit the curb (and has been respawned), `None` otherwise.
    pub fn advance(&mut self, cmd: Command) -> Option<TickOutput> {
        self.state = vehicle::step(&self.state, cmd, self.config.dt, &self.params);
        self.ticks += 1;
        if footprint_inside(&self.state, &self.net, &self.params) {
            return None;
        }
        let out = self.measure(&self.state, true);
        self.respawn();
        Some(out)
    }

    pub fn spawn_poses(&self) -> &[Pose] {
        self.net.spawns()
    }
}
