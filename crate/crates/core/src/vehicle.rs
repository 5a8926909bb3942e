//! Kinematic bicycle vehicle driven by a merged brake/throttle command.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Point2, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_wheel_angle: f64,
    pub a_max: f64,
    pub b_max: f64,
    pub drag: f64,
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            max_wheel_angle: 30f64.to_radians(),
            a_max: 4.0,
            b_max: 8.0,
            drag: 0.05,
            length: 4.5,
            width: 1.8,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("vehicle.wheelbase", self.wheelbase),
            ("vehicle.max_wheel_angle", self.max_wheel_angle),
            ("vehicle.a_max", self.a_max),
            ("vehicle.b_max", self.b_max),
            ("vehicle.drag", self.drag),
            ("vehicle.length", self.length),
            ("vehicle.width", self.width),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.max_wheel_angle >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::config("vehicle.max_wheel_angle", "must be below π/2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pose: Pose,
    /// Longitudinal velocity (m/s), never negative.
    pub v: f64,
    /// Yaw rate (rad/s), counterclockwise positive.
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            v: 0.0,
            yaw_rate: 0.0,
        }
    }
}

/// Merged brake/throttle `u` and steering `s`. Negative steering turns left.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub u: f64,
    pub s: f64,
}

impl Command {
    pub const fn new(u: f64, s: f64) -> Self {
        Self { u, s }
    }
}

/// Splits a merged command into `(throttle, brake)`; the inactive channel is 0.
pub fn split_command(u: f64) -> (f64, f64) {
    if u >= 0.0 {
        (u, 0.0)
    } else {
        (0.0, -u)
    }
}

/// One forward-Euler step. Yaw rate and displacement use the velocity and
/// heading from before the update.
pub fn step(state: &VehicleState, cmd: Command, dt: f64, params: &VehicleParams) -> VehicleState {
    let (throttle, brake) = split_command(cmd.u);
    // positive wheel angle turns counterclockwise (left)
    let wheel_angle = -cmd.s * params.max_wheel_angle;
    let v = state.v;
    let accel = params.a_max * throttle - params.b_max * brake - params.drag * v;
    let yaw_rate = v * wheel_angle.tan() / params.wheelbase;
    let heading = state.pose.heading;
    let position = state.pose.position + Point2::from_polar(v * dt, heading);
    VehicleState {
        pose: Pose {
            position,
            heading: normalize_angle(heading + yaw_rate * dt),
        },
        v: (v + accel * dt).max(0.0),
        yaw_rate,
    }
}

/// Eight collision probes: four corners then four edge midpoints of the
/// oriented body rectangle.
pub fn footprint(state: &VehicleState, params: &VehicleParams) -> [Point2; 8] {
    let (hl, hw) = (params.length / 2.0, params.width / 2.0);
    let local = [
        Point2::new(hl, hw),
        Point2::new(hl, -hw),
        Point2::new(-hl, -hw),
        Point2::new(-hl, hw),
        Point2::new(hl, 0.0),
        Point2::new(0.0, -hw),
        Point2::new(-hl, 0.0),
        Point2::new(0.0, hw),
    ];
    local.map(|p| state.pose.to_world(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const DT: f64 = 0.02;

    #[test]
    fn split_examples() {
        assert_eq!(split_command(0.3), (0.3, 0.0));
        assert_eq!(split_command(-0.2), (0.0, 0.2));
        assert_eq!(split_command(0.0), (0.0, 0.0));
    }

    #[test]
    fn rest_is_fixed_point() {
        let p = VehicleParams::default();
        let s0 = VehicleState::at_rest(Pose::new(1.0, 2.0, 0.3));
        assert_eq!(step(&s0, Command::default(), DT, &p), s0);
    }

    #[test]
    fn one_second_of_half_throttle() {
        // oracle: v ← v + (2.0 − 0.05 v)·0.02 iterated 50 times = 1.9517748721187462
        let p = VehicleParams::default();
        let mut s = VehicleState::default();
        for _ in 0..50 {
            s = step(&s, Command::new(0.5, 0.0), DT, &p);
        }
        assert_abs_diff_eq!(s.v, 1.951_774_872_118_746_2, epsilon = 1e-12);
    }

    #[test]
    fn straight_line_without_steering() {
        let p = VehicleParams::default();
        let mut s = VehicleState {
            pose: Pose::new(0.0, 0.0, 0.7),
            v: 5.0,
            yaw_rate: 0.0,
        };
        let mut pts = vec![s.pose.position];
        for i in 0..200 {
            s = step(&s, Command::new(if i % 2 == 0 { 0.3 } else { -0.1 }, 0.0), DT, &p);
            assert_eq!(s.pose.heading, 0.7);
            assert_eq!(s.yaw_rate, 0.0);
            pts.push(s.pose.position);
        }
        let d = Point2::from_polar(1.0, 0.7);
        for q in pts {
            assert!((q.x * d.y - q.y * d.x).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_steering_turns_left() {
        let p = VehicleParams::default();
        let mut s = VehicleState {
            pose: Pose::new(0.0, 0.0, 0.0),
            v: 5.0,
            yaw_rate: 0.0,
        };
        for _ in 0..10 {
            s = step(&s, Command::new(0.0, -0.5), DT, &p);
        }
        assert!(s.yaw_rate > 0.0 && s.pose.heading > 0.0 && s.pose.position.y > 0.0);
    }

    #[test]
    fn footprint_corners() {
        let p = VehicleParams::default();
        let s = VehicleState::default();
        let f = footprint(&s, &p);
        let mut corners: Vec<(f64, f64)> = f[..4].iter().map(|q| (q.x, q.y)).collect();
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(corners, vec![(-2.25, -0.9), (-2.25, 0.9), (2.25, -0.9), (2.25, 0.9)]);

        let flipped = footprint(&VehicleState::at_rest(Pose::new(0.0, 0.0, PI)), &p);
        for q in &flipped[..4] {
            assert!(f[..4].iter().any(|c| c.distance(*q) < 1e-12));
        }
    }

    #[test]
    fn footprint_translates_rigidly() {
        let p = VehicleParams::default();
        let a = footprint(&VehicleState::at_rest(Pose::new(0.0, 0.0, 0.4)), &p);
        let b = footprint(&VehicleState::at_rest(Pose::new(3.0, -7.0, 0.4)), &p);
        for (qa, qb) in a.iter().zip(&b) {
            assert_abs_diff_eq!(qb.x - qa.x, 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(qb.y - qa.y, -7.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn half_steps_agree_with_full_step() {
        let p = VehicleParams::default();
        let s0 = VehicleState {
            pose: Pose::new(0.0, 0.0, 0.2),
            v: 6.0,
            yaw_rate: 0.1,
        };
        let cmd = Command::new(0.3, 0.4);
        let full = step(&s0, cmd, DT, &p);
        let half = step(&step(&s0, cmd, DT / 2.0, &p), cmd, DT / 2.0, &p);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
        assert!(rel(full.v, half.v) < 1e-3);
        assert!(full.pose.position.distance(half.pose.position) / full.pose.position.norm().max(1.0) < 1e-3);
        assert!((full.pose.heading - half.pose.heading).abs() < 1e-3 * full.pose.heading.abs().max(1.0));
    }
}
