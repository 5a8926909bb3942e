//! Shaped per-decision reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Widths of the yaw-rate change, lateral and speed terms.
    pub theta: [f64; 3],
    pub v_bar: f64,
    /// Desired distance to the right curb (m).
    pub d_bar: f64,
    pub collision_reward: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            theta: [0.4, 1.0, 3.0],
            v_bar: 8.0,
            d_bar: 2.0,
            collision_reward: -20.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if self.theta.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::config("reward.theta", "all entries must be positive"));
        }
        if !(self.d_bar > 0.0) {
            return Err(Error::config("reward.d_bar", "must be positive"));
        }
        if !(self.v_bar >= 0.0) {
            return Err(Error::config("reward.v_bar", "must be non-negative"));
        }
        Ok(())
    }
}

fn gaussian(x: f64, theta: f64) -> f64 {
    (-0.5 * (x / theta).powi(2)).exp()
}

/// `R¹ + R² + R³ − 3` for the three deviations.
pub fn shaped(x: [f64; 3], params: &RewardParams) -> f64 {
    gaussian(x[0], params.theta[0]) + gaussian(x[1], params.theta[1]) + gaussian(x[2], params.theta[2])
        - 3.0
}

/// The three deviations: yaw-rate change since the last decision, lateral
/// error, and speed error. The road width is estimated as leftmost plus
/// rightmost ray; below `2·d̄` the vehicle is asked to center, otherwise to
/// keep `d̄` from the right curb.
pub fn deviations(v_prime_prev: f64, v: f64, v_prime: f64, d: &[f64], params: &RewardParams) -> [f64; 3] {
    let left = d[0];
    let right = d[d.len() - 1];
    let x2 = if left + right < 2.0 * params.d_bar {
        (left - right).abs()
    } else {
        (params.d_bar - right).abs()
    };
    [(v_prime_prev - v_prime).abs(), x2, (v - params.v_bar).abs()]
}

pub fn reward(
    v_prime_prev: f64,
    v: f64,
    v_prime: f64,
    d: &[f64],
    collision: bool,
    params: &RewardParams,
) -> f64 {
    if collision {
        return params.collision_reward;
    }
    shaped(deviations(v_prime_prev, v, v_prime, d, params), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn circ(left: f64, right: f64) -> Vec<f64> {
        let mut d = vec![12.0; 25];
        d[0] = left;
        d[24] = right;
        d
    }

    #[test]
    fn collision_is_constant() {
        let p = RewardParams::default();
        assert_eq!(reward(0.0, 8.0, 0.0, &circ(3.0, 2.0), true, &p), -20.0);
    }

    #[test]
    fn perfect_step_is_zero() {
        let p = RewardParams::default();
        assert_eq!(reward(0.1, 8.0, 0.1, &circ(3.0, 2.0), false, &p), 0.0);
    }

    #[test]
    fn speed_error_of_one_theta() {
        let p = RewardParams::default();
        let r = reward(0.0, 5.0, 0.0, &circ(3.0, 2.0), false, &p);
        assert_abs_diff_eq!(r, (-0.5f64).exp() - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_road_tracks_right_curb() {
        let p = RewardParams::default();
        let x = deviations(0.0, 8.0, 0.0, &circ(6.0, 2.0), &p);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn narrow_road_centers() {
        let p = RewardParams::default();
        let x = deviations(0.0, 8.0, 0.0, &circ(2.5, 1.0), &p);
        assert_eq!(x[1], 1.5);
    }
}
