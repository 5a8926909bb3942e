//! Run configuration: every tunable of every module, with the reference
//! defaults, loadable from a JSON document.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{stadium_loop, straight_road, Pose, RoadNetwork, RoadNetworkFile};
use crate::navigator::NavParams;
use crate::neural::AdamParams;
use crate::rl::dqn::TrainerConfig;
use crate::rl::reward::RewardParams;
use crate::rl::state::state_len;
use crate::simulator::{footprint_inside, SensorParams, SimConfig};
use crate::vehicle::{VehicleParams, VehicleState};

/// Where the road network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSource {
    /// A road network file; relative paths resolve against the config file.
    File { path: PathBuf },
    /// Closed stadium loop (two straights joined by semicircles).
    Stadium {
        straight: f64,
        radius: f64,
        width: f64,
        #[serde(default = "default_arc_points")]
        arc_points: usize,
    },
    Straight { length: f64, width: f64 },
}

fn default_arc_points() -> usize {
    48
}

impl Default for MapSource {
    /// A ~300 m loop, 5 m wide.
    fn default() -> Self {
        MapSource::Stadium {
            straight: 80.0,
            radius: 22.0,
            width: 5.0,
            arc_points: default_arc_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub negative_slope: f64,
    /// Standard deviation of the initial weights.
    pub init_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![400, 300],
            negative_slope: 0.3,
            init_std: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    /// Memorizer queue length.
    pub history: usize,
    /// Feed v/v̄ and d/α instead of raw measurements.
    pub normalize_inputs: bool,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            history: 1,
            normalize_inputs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    /// Ticks between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
    /// Trailing window (decisions) of the smoothed reward column.
    pub smoothing_window: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            metrics: "metrics.csv".into(),
            checkpoint: "agent.rlds".into(),
            checkpoint_interval: 100_000,
            smoothing_window: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub total_ticks: u64,
    pub map: MapSource,
    /// Spawns sampled when the map does not list its own.
    pub spawn_count: usize,
    pub dt: f64,
    pub sensor: SensorParams,
    pub vehicle: VehicleParams,
    pub navigator: NavParams,
    pub network: NetworkConfig,
    pub adam: AdamParams,
    pub agent: AgentParams,
    pub reward: RewardParams,
    pub trainer: TrainerConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_ticks: 1_000_000,
            map: MapSource::default(),
            spawn_count: 64,
            dt: 0.02,
            sensor: SensorParams::default(),
            vehicle: VehicleParams::default(),
            navigator: NavParams::default(),
            network: NetworkConfig::default(),
            adam: AdamParams::default(),
            agent: AgentParams::default(),
            reward: RewardParams::default(),
            trainer: TrainerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Independent seeds for every random stream, derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSet {
    pub sim: u64,
    pub navigator: u64,
    pub explorer: u64,
    pub sampler: u64,
    pub init: u64,
    pub spawns: u64,
}

impl SeedSet {
    pub fn derive(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        Self {
            sim: rng.next_u64(),
            navigator: rng.next_u64(),
            explorer: rng.next_u64(),
            sampler: rng.next_u64(),
            init: rng.next_u64(),
            spawns: rng.next_u64(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Loads and validates; a relative map path is resolved against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let MapSource::File { path: map } = &mut cfg.map {
            if map.is_relative() {
                if let Some(dir) = path.parent() {
                    *map = dir.join(&*map);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config(0).validate()?;
        self.vehicle.validate()?;
        self.navigator.validate(self.sensor.ray_count)?;
        self.adam.validate()?;
        self.reward.validate()?;
        self.trainer.validate()?;
        if self.agent.history == 0 {
            return Err(Error::config("agent.history", "must be at least 1"));
        }
        if self.network.hidden.contains(&0) {
            return Err(Error::config("network.hidden", "layer sizes must be positive"));
        }
        if !(self.network.init_std > 0.0) {
            return Err(Error::config("network.init_std", "must be positive"));
        }
        if self.output.smoothing_window == 0 {
            return Err(Error::config("output.smoothing_window", "must be positive"));
        }
        if self.spawn_count == 0 {
            return Err(Error::config("spawn_count", "must be positive"));
        }
        match &self.map {
            MapSource::Stadium {
                straight,
                radius,
                width,
                arc_points,
            } => {
                if !(*straight >= 0.0 && *radius > 0.0 && *width > 0.0 && *arc_points >= 2) {
                    return Err(Error::config("map", "stadium needs straight >= 0, positive radius and width, arc_points >= 2"));
                }
            }
            MapSource::Straight { length, width } => {
                if !(*length > 0.0 && *width > 0.0) {
                    return Err(Error::config("map", "straight road needs positive length and width"));
                }
            }
            MapSource::File { .. } => {}
        }
        Ok(())
    }

    pub fn seeds(&self) -> SeedSet {
        SeedSet::derive(self.seed)
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            sensor: self.sensor,
            seed,
        }
    }

    pub fn state_len(&self) -> usize {
        state_len(self.agent.history, self.sensor.ray_count)
    }

    /// `[state + action, hidden…, 1]`.
    pub fn network_dims(&self) -> Vec<usize> {
        std::iter::once(self.state_len() + 2)
            .chain(self.network.hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect()
    }

    /// Builds the road network, sampling spawns whose vehicle footprint fits
    /// when the source does not provide them.
    pub fn build_network(&self) -> Result<RoadNetwork> {
        let params = self.vehicle;
        let fits = move |net: &RoadNetwork, p: &Pose| footprint_inside(&VehicleState::at_rest(*p), net, &params);
        let seed = self.seeds().spawns;
        let road = match &self.map {
            MapSource::File { path } => {
                let file = RoadNetworkFile::load(path)?;
                return file.into_network(seed, fits);
            }
            MapSource::Stadium {
                straight,
                radius,
                width,
                arc_points,
            } => stadium_loop(*straight, *radius, *width, *arc_points),
            MapSource::Straight { length, width } => straight_road(*length, *width),
        };
        let net = RoadNetwork::new(vec![road], Vec::new())?;
        let spawns = net.sample_spawns_where(self.spawn_count, seed, |p| fits(&net, p))?;
        net.with_spawns(spawns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let c = RunConfig::default();
        assert_eq!(c.network_dims(), vec![30, 400, 300, 1]);
        assert_eq!(c.sensor.alpha, 12.0);
        assert_eq!(c.sensor.beta, 180.0);
        assert_eq!(c.sensor.ray_count, 25);
        assert_eq!(c.trainer.gamma, 0.95);
        assert_eq!(c.trainer.batch, 16);
        assert_eq!(c.trainer.warmup, 500);
        assert_eq!(c.trainer.buffer_capacity, 1000);
        assert_eq!(c.trainer.n, 10);
        assert_eq!(c.reward.theta, [0.4, 1.0, 3.0]);
        assert_eq!(c.adam.lr, 0.0005);
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.seed = 17;
        c.map = MapSource::File {
            path: "roads.json".into(),
        };
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 3, "trainer": {"gamma": 0.9}}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.trainer.gamma, 0.9);
        assert_eq!(c.trainer.batch, 16);
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = RunConfig::from_json(r#"{"trainer": {"gamma": 1.5}}"#).unwrap_err();
        assert!(err.to_string().contains("trainer.gamma"), "{err}");
        let err = RunConfig::from_json(r#"{"sensor": {"ray_count": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("sensor.ray_count"), "{err}");
        let err = RunConfig::from_json(r#"{"bogus": 1}"#).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = SeedSet::derive(5);
        assert_eq!(a, SeedSet::derive(5));
        assert_ne!(a, SeedSet::derive(6));
        let all = [a.sim, a.navigator, a.explorer, a.sampler, a.init, a.spawns];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn default_map_builds_with_64_spawns() {
        let net = RunConfig::default().build_network().unwrap();
        assert_eq!(net.spawns().len(), 64);
        assert!((net.total_length() - 298.2).abs() < 1.0, "{}", net.total_length());
    }
}
