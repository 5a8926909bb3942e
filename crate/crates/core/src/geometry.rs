//! Planar road corridors.
//!
//! The drivable area is the union of constant-width strips around each road
//! centerline: a point is inside iff its distance to some centerline is at most
//! half of that road's width. The strip boundary is the curb. Junctions are
//! simply overlapping strips.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed march step of the raycaster (m).
pub const RAY_STEP: f64 = 0.1;
/// Bisection stops once the bracketing interval is this narrow (m).
pub const RAY_TOLERANCE: f64 = 0.001;
pub const DEFAULT_SPAWN_COUNT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose; heading is counterclockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: Point2,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    /// Maps a point given in the body frame (x forward, y left) to world coordinates.
    pub fn to_world(&self, local: Point2) -> Point2 {
        let (s, c) = self.heading.sin_cos();
        self.position + Point2::new(c * local.x - s * local.y, s * local.x + c * local.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegmentSpec {
    pub id: String,
    pub width: f64,
    pub centerline: Vec<Point2>,
}

impl RoadSegmentSpec {
    pub fn new(id: impl Into<String>, width: f64, centerline: Vec<Point2>) -> Self {
        Self {
            id: id.into(),
            width,
            centerline,
        }
    }

    pub fn length(&self) -> f64 {
        self.centerline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidNetwork(format!("road `{}`: {why}", self.id)));
        if !(self.width.is_finite() && self.width > 0.0) {
            return bad("width must be positive");
        }
        if self.centerline.len() < 2 {
            return bad("centerline needs at least two points");
        }
        if self.centerline.iter().any(|p| !p.is_finite()) {
            return bad("non-finite centerline coordinate");
        }
        if self.centerline.windows(2).any(|w| w[0] == w[1]) {
            return bad("consecutive centerline points coincide");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Point2,
    b: Point2,
    half_width: f64,
}

impl Segment {
    fn distance(&self, p: Point2) -> f64 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
        p.distance(self.a + ab * t)
    }

    fn clearance(&self, p: Point2) -> f64 {
        self.half_width - self.distance(p)
    }
}

/// Uniform grid over segment bounding boxes, inflated by half width plus
/// [`GRID_MARGIN`]. A cell lists every segment whose clearance could be at
/// least `-GRID_MARGIN` anywhere inside it, so a local maximum `>= -GRID_MARGIN`
/// is the global one.
const GRID_MARGIN: f64 = 1.0;
const GRID_MAX_CELLS: usize = 1 << 20;

#[derive(Debug, Clone)]
struct SegmentGrid {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl SegmentGrid {
    fn build(segments: &[Segment]) -> Self {
        let reach = |s: &Segment| s.half_width + GRID_MARGIN;
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in segments {
            let r = reach(s);
            lo.x = lo.x.min(s.a.x.min(s.b.x) - r);
            lo.y = lo.y.min(s.a.y.min(s.b.y) - r);
            hi.x = hi.x.max(s.a.x.max(s.b.x) + r);
            hi.y = hi.y.max(s.a.y.max(s.b.y) + r);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y);
        let mut cell = 4.0_f64;
        while ((extent / cell).ceil() as usize + 1).pow(2) > GRID_MAX_CELLS {
            cell *= 2.0;
        }
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;

        // a cell is listed when its center lies within reach plus the cell's
        // half diagonal, which bounds the distance from any point inside it
        let half_diag = cell * std::f64::consts::FRAC_1_SQRT_2;
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (i, s) in segments.iter().enumerate() {
            let r = reach(s);
            let x0 = ((s.a.x.min(s.b.x) - r - lo.x) / cell).floor() as usize;
            let x1 = ((s.a.x.max(s.b.x) + r - lo.x) / cell).floor() as usize;
            let y0 = ((s.a.y.min(s.b.y) - r - lo.y) / cell).floor() as usize;
            let y1 = ((s.a.y.max(s.b.y) + r - lo.y) / cell).floor() as usize;
            for cy in y0..=y1.min(ny - 1) {
                for cx in x0..=x1.min(nx - 1) {
                    let center = lo + Point2::new((cx as f64 + 0.5) * cell, (cy as f64 + 0.5) * cell);
                    if s.distance(center) <= r + half_diag {
                        pairs.push(((cy * nx + cx) as u32, i as u32));
                    }
                }
            }
        }
        pairs.sort_unstable();
        let mut starts = vec![0u32; nx * ny + 1];
        for &(c, _) in &pairs {
            starts[c as usize + 1] += 1;
        }
        for k in 0..nx * ny {
            starts[k + 1] += starts[k];
        }
        let items = pairs.into_iter().map(|(_, i)| i).collect();
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            starts,
            items,
        }
    }

    fn candidates(&self, p: Point2) -> &[u32] {
        let fx = (p.x - self.origin.x) / self.cell;
        let fy = (p.y - self.origin.y) / self.cell;
        if !(fx >= 0.0 && fy >= 0.0) {
            return &[];
        }
        let (cx, cy) = (fx as usize, fy as usize);
        if cx >= self.nx || cy >= self.ny {
            return &[];
        }
        let k = cy * self.nx + cx;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }
}

/// Immutable road network with a spatial index for clearance queries.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    roads: Vec<RoadSegmentSpec>,
    spawns: Vec<Pose>,
    segments: Vec<Segment>,
    grid: SegmentGrid,
}

impl RoadNetwork {
    /// Builds a network with an explicit spawn list (which may be empty).
    pub fn new(roads: Vec<RoadSegmentSpec>, spawns: Vec<Pose>) -> Result<Self> {
        if roads.is_empty() {
            return Err(Error::InvalidNetwork("network has no roads".into()));
        }
        for r in &roads {
            r.validate()?;
        }
        let segments: Vec<Segment> = roads
            .iter()
            .flat_map(|r| {
                r.centerline.windows(2).map(move |w| Segment {
                    a: w[0],
                    b: w[1],
                    half_width: r.width / 2.0,
                })
            })
            .collect();
        let grid = SegmentGrid::build(&segments);
        let net = Self {
            roads,
            spawns: Vec::new(),
            segments,
            grid,
        };
        net.with_spawns(spawns)
    }

    /// Replaces the spawn list; every spawn must lie inside the corridor.
    pub fn with_spawns(mut self, spawns: Vec<Pose>) -> Result<Self> {
        for (i, s) in spawns.iter().enumerate() {
            if !s.position.is_finite() || !s.heading.is_finite() {
                return Err(Error::InvalidNetwork(format!("spawn {i} is not finite")));
            }
            if self.clearance(s.position) < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "spawn {i} at ({}, {}) lies outside the corridor",
                    s.position.x, s.position.y
                )));
            }
        }
        self.spawns = spawns;
        Ok(self)
    }

    pub fn roads(&self) -> &[RoadSegmentSpec] {
        &self.roads
    }

    pub fn spawns(&self) -> &[Pose] {
        &self.spawns
    }

    pub fn total_length(&self) -> f64 {
        self.roads.iter().map(RoadSegmentSpec::length).sum()
    }

    /// Signed clearance: `max_road (width/2 − dist(p, centerline))`.
    /// The point is inside the corridor iff the result is `>= 0`.
    pub fn clearance(&self, p: Point2) -> f64 {
        let local = self
            .grid
            .candidates(p)
            .iter()
            .map(|&i| self.segments[i as usize].clearance(p))
            .fold(f64::NEG_INFINITY, f64::max);
        if local >= -GRID_MARGIN {
            local
        } else {
            self.clearance_exhaustive(p)
        }
    }

    /// Clearance by scanning every segment, bypassing the spatial index.
    pub fn clearance_exhaustive(&self, p: Point2) -> f64 {
        self.segments
            .iter()
            .map(|s| s.clearance(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.clearance(p) >= 0.0
    }

    /// Distance from `origin` along `direction` to the first inside→outside
    /// crossing of the curb, or `max_dist` when there is none closer.
    ///
    /// Samples the ray every [`RAY_STEP`] and bisects the first bracketing
    /// interval down to [`RAY_TOLERANCE`]. Samples closer than the current
    /// clearance are provably inside and skipped, which does not change which
    /// sample is the first outside one. Pass `f64::INFINITY` for an unbounded ray.
    pub fn raycast(&self, origin: Point2, direction: f64, max_dist: f64) -> Result<f64> {
        let c0 = self.clearance(origin);
        if !(c0 >= 0.0) {
            return Err(Error::RayOutsideCorridor);
        }
        if !(max_dist > 0.0) {
            return Ok(0.0);
        }
        let dir = Point2::from_polar(1.0, direction);
        let at = |t: f64| origin + dir * t;
        let last = (max_dist / RAY_STEP).ceil();
        let mut k = 0.0_f64;
        let mut c = c0;
        loop {
            // samples k+1 ..= k+safe lie within the clearance disc, hence inside
            let safe = ((c - 1e-9).max(0.0) / RAY_STEP).floor();
            if k + safe >= last {
                return Ok(max_dist);
            }
            let probe = k + safe + 1.0;
            let cp = self.clearance(at(probe * RAY_STEP));
            if cp < 0.0 {
                let mut lo = (probe - 1.0) * RAY_STEP;
                let mut hi = probe * RAY_STEP;
                while hi - lo > RAY_TOLERANCE {
                    let mid = 0.5 * (lo + hi);
                    if self.clearance(at(mid)) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok((0.5 * (lo + hi)).min(max_dist));
            }
            k = probe;
            c = cp;
        }
    }

    /// `k` poses uniform by arc length over all centerlines, heading along the
    /// local tangent with a fair coin choosing the direction.
    pub fn sample_spawns(&self, k: usize, seed: u64) -> Result<Vec<Pose>> {
        self.sample_spawns_where(k, seed, |_| true)
    }

    /// Like [`sample_spawns`](Self::sample_spawns) but rejects poses failing `accept`.
    pub fn sample_spawns_where(
        &self,
        k: usize,
        seed: u64,
        accept: impl Fn(&Pose) -> bool,
    ) -> Result<Vec<Pose>> {
        let mut cumulative = Vec::with_capacity(self.segments.len());
        let mut total = 0.0;
        for s in &self.segments {
            total += s.a.distance(s.b);
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::InvalidNetwork("network has zero length".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(k);
        let max_attempts = 1000 * k.max(1);
        let mut attempts = 0;
        while out.len() < k {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::InvalidNetwork(format!(
                    "could not place {k} acceptable spawns after {max_attempts} attempts"
                )));
            }
            let r = rng.random::<f64>() * total;
            let reverse = rng.random_bool(0.5);
            let i = cumulative.partition_point(|&c| c <= r).min(self.segments.len() - 1);
            let seg = &self.segments[i];
            let len = seg.a.distance(seg.b);
            let start = cumulative[i] - len;
            let t = ((r - start) / len).clamp(0.0, 1.0);
            let p = seg.a + (seg.b - seg.a) * t;
            let tangent = seg.b - seg.a;
            let mut heading = tangent.y.atan2(tangent.x);
            if reverse {
                heading += PI;
            }
            let pose = Pose::new(p.x, p.y, heading);
            if accept(&pose) {
                out.push(pose);
            }
        }
        Ok(out)
    }

    /// The network reflected about the x axis (y → −y, heading → −heading).
    pub fn mirrored(&self) -> Result<Self> {
        let roads = self
            .roads
            .iter()
            .map(|r| {
                RoadSegmentSpec::new(
                    r.id.clone(),
                    r.width,
                    r.centerline.iter().map(|p| Point2::new(p.x, -p.y)).collect(),
                )
            })
            .collect();
        let spawns = self
            .spawns
            .iter()
            .map(|s| Pose::new(s.position.x, -s.position.y, -s.heading))
            .collect();
        Self::new(roads, spawns)
    }

    pub fn to_file(&self) -> RoadNetworkFile {
        RoadNetworkFile {
            roads: self
                .roads
                .iter()
                .map(|r| RoadRecord {
                    id: r.id.clone(),
                    width_m: r.width,
                    centerline: r.centerline.iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
            spawns: if self.spawns.is_empty() {
                None
            } else {
                Some(
                    self.spawns
                        .iter()
                        .map(|s| [s.position.x, s.position.y, s.heading])
                        .collect(),
                )
            },
        }
    }
}

/// On-disk road network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetworkFile {
    pub roads: Vec<RoadRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawns: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadRecord {
    pub id: String,
    pub width_m: f64,
    pub centerline: Vec<[f64; 2]>,
}

impl RoadNetworkFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds the network. Missing spawns are sampled with `spawn_seed`,
    /// keeping only poses accepted by `accept`.
    pub fn into_network(
        self,
        spawn_seed: u64,
        accept: impl Fn(&RoadNetwork, &Pose) -> bool,
    ) -> Result<RoadNetwork> {
        let roads = self
            .roads
            .into_iter()
            .map(|r| {
                RoadSegmentSpec::new(
                    r.id,
                    r.width_m,
                    r.centerline.into_iter().map(|[x, y]| Point2::new(x, y)).collect(),
                )
            })
            .collect();
        let net = RoadNetwork::new(roads, Vec::new())?;
        let spawns = match self.spawns {
            Some(s) => s.into_iter().map(|[x, y, h]| Pose::new(x, y, h)).collect(),
            None => net.sample_spawns_where(DEFAULT_SPAWN_COUNT, spawn_seed, |p| accept(&net, p))?,
        };
        net.with_spawns(spawns)
    }
}

/// Straight road along +x starting at the origin.
pub fn straight_road(length: f64, width: f64) -> RoadSegmentSpec {
    RoadSegmentSpec::new(
        "straight",
        width,
        vec![Point2::new(0.0, 0.0), Point2::new(length, 0.0)],
    )
}

/// Closed stadium loop: two straights of `straight` meters joined by
/// semicircles of `radius`, centered on the origin. `arc_points` is the number
/// of polyline segments per semicircle.
pub fn stadium_loop(straight: f64, radius: f64, width: f64, arc_points: usize) -> RoadSegmentSpec {
    let h = straight / 2.0;
    let mut pts: Vec<Point2> = Vec::with_capacity(2 * arc_points + 3);
    let mut push = |p: Point2| {
        if pts.last().is_none_or(|q| q.distance(p) > 1e-9) {
            pts.push(p);
        }
    };
    push(Point2::new(-h, -radius));
    for i in 0..=arc_points {
        let a = -PI / 2.0 + PI * i as f64 / arc_points as f64;
        push(Point2::new(h + radius * a.cos(), radius * a.sin()));
    }
    for i in 0..arc_points {
        let a = PI / 2.0 + PI * i as f64 / arc_points as f64;
        push(Point2::new(-h + radius * a.cos(), radius * a.sin()));
    }
    let first = pts[0];
    pts.push(first);
    RoadSegmentSpec::new("stadium", width, pts)
}
