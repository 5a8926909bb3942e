//! Adaptive action-space restriction.
//!
//! Drivable directions (modes) are read off the circogram, a three-state
//! deterministic finite state machine commits to one of them, and the
//! steering grid is narrowed to the block matching the circogram region that
//! holds the chosen mode's center. Throttle is never restricted.
//!
//! Ray and region indices in this module are 1-based, matching the circogram
//! convention where ray 1 is the leftmost.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::Command;

/// `n` equally spaced values over `[lo, hi]`, endpoints exact. Symmetric
/// ranges give exactly antisymmetric grids.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let center = (lo + hi) / 2.0;
    let half = (hi - lo) / 2.0;
    let n1 = (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => center + half * (2.0 * i as f64 - n1) / n1,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

/// The discretized action space: merged throttle/brake × steering.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrids {
    pub throttle: Vec<f64>,
    pub steering: Vec<f64>,
}

impl ActionGrids {
    pub fn new(throttle: GridSpec, steering: GridSpec) -> Self {
        Self {
            throttle: linspace(throttle.min, throttle.max, throttle.count),
            steering: linspace(steering.min, steering.max, steering.count),
        }
    }

    pub fn len(&self) -> usize {
        self.throttle.len() * self.steering.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_pairs(&self) -> Vec<Command> {
        self.throttle
            .iter()
            .flat_map(|&u| self.steering.iter().map(move |&s| Command::new(u, s)))
            .collect()
    }
}

impl Default for ActionGrids {
    fn default() -> Self {
        let p = NavParams::default();
        Self::new(p.throttle_grid, p.steering_grid)
    }
}

/// A contiguous run of rays, `start <= center <= end`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mode {
    pub start: usize,
    pub end: usize,
    pub center: usize,
}

impl Mode {
    pub fn new(start: usize, end: usize) -> Self {
        Self {
            start,
            end,
            center: (start + end) / 2,
        }
    }

    /// Number of rays in the run.
    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DfsmState {
    /// The unique eligible mode is taken.
    W0,
    /// One of several eligible modes is drawn uniformly.
    W1,
    /// The mode closest to the previously chosen one is kept.
    W2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DfsmInput {
    /// Exactly one eligible mode.
    Sigma0,
    /// More than one eligible mode.
    Sigma1,
}

/// Transition function of the navigator DFSM. There are no accepting states.
pub fn dfsm_step(w: DfsmState, input: DfsmInput) -> DfsmState {
    use DfsmInput::*;
    use DfsmState::*;
    match (w, input) {
        (W0, Sigma0) => W0,
        (W0, Sigma1) => W1,
        (W1, Sigma0) => W0,
        (W1, Sigma1) => W2,
        (W2, Sigma0) => W0,
        (W2, Sigma1) => W2,
    }
}

pub fn dfsm_input(modes: &[Mode]) -> DfsmInput {
    if modes.len() == 1 {
        DfsmInput::Sigma0
    } else {
        DfsmInput::Sigma1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavParams {
    /// Number of circogram regions and steering blocks (ψ).
    pub regions: usize,
    /// A ray is open when it reaches at least `alpha - open_margin`.
    pub open_margin: f64,
    /// Shortest run of open rays that counts as an eligible mode.
    pub min_run: usize,
    pub throttle_grid: GridSpec,
    pub steering_grid: GridSpec,
}

impl Default for NavParams {
    fn default() -> Self {
        Self {
            regions: 5,
            open_margin: 0.1,
            min_run: 3,
            throttle_grid: GridSpec {
                count: 20,
                min: -0.5,
                max: 0.5,
            },
            steering_grid: GridSpec {
                count: 100,
                min: -0.8,
                max: 0.8,
            },
        }
    }
}

impl NavParams {
    pub fn validate(&self, ray_count: usize) -> Result<()> {
        if self.regions == 0 || !ray_count.is_multiple_of(self.regions) {
            return Err(Error::config("navigator.regions", "must divide the ray count"));
        }
        if !self.steering_grid.count.is_multiple_of(self.regions) {
            return Err(Error::config(
                "navigator.regions",
                "must divide the steering grid size",
            ));
        }
        if self.min_run == 0 {
            return Err(Error::config("navigator.min_run", "must be at least 1"));
        }
        if !(self.open_margin >= 0.0) {
            return Err(Error::config("navigator.open_margin", "must be non-negative"));
        }
        for (name, g) in [
            ("navigator.throttle_grid", self.throttle_grid),
            ("navigator.steering_grid", self.steering_grid),
        ] {
            if g.count < 2 || !(g.min < g.max) {
                return Err(Error::config(name, "needs count >= 2 and min < max"));
            }
        }
        Ok(())
    }
}

/// Eligible modes: maximal runs of at least `min_run` rays reaching
/// `alpha - open_margin`. Without any, a single fallback mode covering the
/// lowest-index run of rays tied (within 1e-9) with the longest ray.
pub fn extract_modes(d: &[f64], alpha: f64, params: &NavParams) -> Vec<Mode> {
    let threshold = alpha - params.open_margin;
    let mut modes = runs(d, |x| x >= threshold)
        .filter(|m| m.width() >= params.min_run)
        .collect::<Vec<_>>();
    if modes.is_empty() {
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        modes.extend(runs(d, |x| (x - max).abs() <= 1e-9).take(1));
    }
    modes
}

fn runs<'a>(d: &'a [f64], open: impl Fn(f64) -> bool + 'a) -> impl Iterator<Item = Mode> + 'a {
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < d.len() && !open(d[i]) {
            i += 1;
        }
        if i == d.len() {
            return None;
        }
        let start = i;
        while i < d.len() && open(d[i]) {
            i += 1;
        }
        Some(Mode::new(start + 1, i))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NavState {
    pub w: DfsmState,
    pub prev_center: Option<usize>,
}

impl Default for NavState {
    fn default() -> Self {
        Self {
            w: DfsmState::W0,
            prev_center: None,
        }
    }
}

/// Picks a mode for DFSM state `w` (the state after the transition).
pub fn select_mode(
    w: DfsmState,
    modes: &[Mode],
    prev_center: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Mode> {
    match w {
        DfsmState::W0 => match modes {
            [m] => Ok(*m),
            _ => Err(Error::Navigator("state w0 requires exactly one mode")),
        },
        DfsmState::W1 => {
            if modes.is_empty() {
                return Err(Error::Navigator("no modes to choose from"));
            }
            Ok(modes[rng.random_range(0..modes.len())])
        }
        DfsmState::W2 => {
            let prev = prev_center.ok_or(Error::Navigator("state w2 without a previous mode"))?;
            // min_by_key keeps the first minimum, i.e. the lowest start index
            modes
                .iter()
                .min_by_key(|m| m.center.abs_diff(prev))
                .copied()
                .ok_or(Error::Navigator("no modes to choose from"))
        }
    }
}

/// Region (1-based) whose rays contain the mode center.
pub fn region_of(mode: &Mode, ray_count: usize, regions: usize) -> usize {
    1 + (mode.center - 1) / (ray_count / regions)
}

/// Steering block for the mode's region. Region 1 (leftmost rays) maps to the
/// most negative steering values, which turn left.
pub fn steering_subset<'a>(
    mode: &Mode,
    steering: &'a [f64],
    ray_count: usize,
    regions: usize,
) -> &'a [f64] {
    let r = region_of(mode, ray_count, regions);
    let block = steering.len() / regions;
    &steering[(r - 1) * block..r * block]
}

/// The restricted action set: full throttle grid × one steering block.
#[derive(Debug, Clone, PartialEq)]
pub struct AllowedActions {
    pub pairs: Vec<Command>,
    /// 1-based region that selected the steering block.
    pub region: usize,
}

impl AllowedActions {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Exploration candidates: pairs with strictly positive throttle.
    pub fn forward_only(&self) -> impl Iterator<Item = &Command> {
        self.pairs.iter().filter(|c| c.u > 0.0)
    }
}

/// One navigator decision: modes → DFSM input → transition → mode choice →
/// steering block. Returns the allowed actions and the next navigator state.
pub fn allowed_actions(
    d: &[f64],
    alpha: f64,
    nav: &NavState,
    grids: &ActionGrids,
    params: &NavParams,
    rng: &mut ChaCha8Rng,
) -> Result<(AllowedActions, NavState)> {
    let modes = extract_modes(d, alpha, params);
    let w = dfsm_step(nav.w, dfsm_input(&modes));
    let mode = select_mode(w, &modes, nav.prev_center, rng)?;
    let subset = steering_subset(&mode, &grids.steering, d.len(), params.regions);
    let pairs = grids
        .throttle
        .iter()
        .flat_map(|&u| subset.iter().map(move |&s| Command::new(u, s)))
        .collect();
    Ok((
        AllowedActions {
            pairs,
            region: region_of(&mode, d.len(), params.regions),
        },
        NavState {
            w,
            prev_center: Some(mode.center),
        },
    ))
}

/// Navigator with its own DFSM state and random stream.
#[derive(Debug, Clone)]
pub struct Navigator {
    pub grids: ActionGrids,
    pub params: NavParams,
    pub alpha: f64,
    pub state: NavState,
    rng: ChaCha8Rng,
}

impl Navigator {
    pub fn new(params: NavParams, alpha: f64, rng: ChaCha8Rng) -> Self {
        Self {
            grids: ActionGrids::new(params.throttle_grid, params.steering_grid),
            params,
            alpha,
            state: NavState::default(),
            rng,
        }
    }

    pub fn allowed_actions(&mut self, d: &[f64]) -> Result<AllowedActions> {
        let (allowed, next) =
            allowed_actions(d, self.alpha, &self.state, &self.grids, &self.params, &mut self.rng)?;
        self.state = next;
        Ok(allowed)
    }

    /// Evaluates without committing the DFSM transition. Draws from a copy of
    /// the random stream, so the navigator is left untouched.
    pub fn peek_allowed_actions(&self, d: &[f64]) -> Result<AllowedActions> {
        let mut rng = self.rng.clone();
        allowed_actions(d, self.alpha, &self.state, &self.grids, &self.params, &mut rng)
            .map(|(a, _)| a)
    }

    pub fn reset(&mut self) {
        self.state = NavState::default();
    }
}
