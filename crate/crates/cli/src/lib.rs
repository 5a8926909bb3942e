//! Commands behind the `rlds` binary: map import, training, greedy
//! evaluation and the random-policy baseline.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use rlds_core::geometry::{RoadNetwork, RoadNetworkFile};
use rlds_core::metrics::{CsvWriter, DecisionRecord, MetricsTracker, Summary};
use rlds_core::simulator::footprint_inside;
use rlds_core::{osm, Agent, Mlp, Policy, RunConfig, VehicleParams, VehicleState};

/// Loads a config file, or the defaults when no path is given, and applies
/// an optional seed override.
pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Converts an OSM XML file to a road network file with `spawns` sampled
/// spawn poses whose vehicle footprint lies inside the corridor.
pub fn cmd_import(osm_path: &Path, out_path: &Path, spawns: usize, seed: u64, vehicle: &VehicleParams) -> Result<RoadNetworkFile> {
    let text = fs::read_to_string(osm_path).with_context(|| format!("reading {}", osm_path.display()))?;
    let (_, roads) = osm::import(&text)?;
    let net = RoadNetwork::new(roads, Vec::new())?;
    let poses = net.sample_spawns_where(spawns, seed, |p| footprint_inside(&VehicleState::at_rest(*p), &net, vehicle))?;
    let file = net.with_spawns(poses)?.to_file();
    fs::write(out_path, file.to_json()?).with_context(|| format!("writing {}", out_path.display()))?;
    Ok(file)
}

/// Writes `net` (with optimizer state) via a temporary file and rename, so
/// an interrupted write never leaves a truncated checkpoint behind.
pub fn write_checkpoint(agent: &Agent, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        agent.network().save(Some(agent.optimizer()), &mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_network(cfg: &RunConfig, checkpoint: &Path) -> Result<Mlp> {
    let f = File::open(checkpoint).with_context(|| format!("opening {}", checkpoint.display()))?;
    let (net, _) = Mlp::load(std::io::BufReader::new(f), cfg.network.negative_slope, cfg.adam)?;
    let expected = cfg.network_dims();
    if net.dims() != expected {
        bail!(
            "checkpoint {} has layer dims {:?} but the config expects {:?}",
            checkpoint.display(),
            net.dims(),
            expected
        );
    }
    Ok(net)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub ticks: u64,
    pub summary: Summary,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
}

/// Trains for `cfg.total_ticks`, streaming one metrics row per completed
/// transition and checkpointing every `checkpoint_interval` ticks and at exit.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    let mut agent = Agent::from_config(cfg, Policy::Learn)?;
    let out = &cfg.output;
    let file = File::create(&out.metrics).with_context(|| format!("creating {}", out.metrics.display()))?;
    let mut csv = CsvWriter::new(BufWriter::new(file))?;
    let mut tracker = MetricsTracker::new(out.smoothing_window);
    let mut records = Vec::new();
    let interval = if out.checkpoint_interval == 0 { cfg.total_ticks } else { out.checkpoint_interval };
    while agent.ticks() < cfg.total_ticks {
        let chunk = interval.min(cfg.total_ticks - agent.ticks());
        agent.run(chunk, |_, record| {
            records.push(record);
            csv.write(&tracker.observe(record))
        })?;
        if agent.ticks() < cfg.total_ticks {
            write_checkpoint(&agent, &out.checkpoint)?;
        }
    }
    write_checkpoint(&agent, &out.checkpoint)?;
    Ok(TrainReport {
        ticks: agent.ticks(),
        summary: Summary::from_records(&records, cfg.reward.v_bar),
        metrics: out.metrics.clone(),
        checkpoint: out.checkpoint.clone(),
    })
}

fn run_policy(agent: &mut Agent, ticks: u64) -> Result<Vec<DecisionRecord>> {
    let mut records = Vec::new();
    agent.run(ticks, |_, r| {
        records.push(r);
        Ok(())
    })?;
    Ok(records)
}

/// Greedy rollout of a checkpoint without training.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, ticks: u64) -> Result<Summary> {
    let net = load_network(cfg, checkpoint)?;
    let roads = Arc::new(cfg.build_network()?);
    let mut agent = Agent::new(cfg, roads, net, None, Policy::Greedy)?;
    Ok(Summary::from_records(&run_policy(&mut agent, ticks)?, cfg.reward.v_bar))
}

/// Rollout drawing every action uniformly from the allowed forward actions.
pub fn cmd_baseline(cfg: &RunConfig, ticks: u64) -> Result<Summary> {
    let mut agent = Agent::from_config(cfg, Policy::Random)?;
    Ok(Summary::from_records(&run_policy(&mut agent, ticks)?, cfg.reward.v_bar))
}
