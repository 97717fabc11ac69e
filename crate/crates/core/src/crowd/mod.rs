//! Pedestrian policies: ORCA and the Social Force Model, plus per-human
//! parameter sampling and goal resampling.

mod lp;
pub mod orca;
pub mod sfm;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::rng::Rng;

pub use lp::{solve as solve_linear_program, Line};
pub use orca::{orca_lines, orca_velocity};
pub use sfm::sfm_velocity;

/// Goal-reached threshold for humans, metres between centre and goal.
pub const DEFAULT_GOAL_TOLERANCE: f64 = 0.3;

/// Another disc an agent has to take into account.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    /// Whether the neighbour shares avoidance effort. Static humans, objects
    /// and the robot do not, so the agent takes full responsibility.
    pub reciprocal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrcaParams {
    pub time_horizon: f64,
    pub time_horizon_obstacles: f64,
    pub neighbor_dist: f64,
    pub max_neighbors: u32,
    pub max_speed: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            time_horizon: 2.0,
            time_horizon_obstacles: 1.0,
            neighbor_dist: 4.0,
            max_neighbors: 10,
            max_speed: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfmParams {
    /// Relaxation time τ (s).
    pub relaxation_time: f64,
    /// Human-human repulsion strength A (m/s²).
    pub interaction_strength: f64,
    /// Human-human repulsion range B (m).
    pub interaction_range: f64,
    pub obstacle_strength: f64,
    pub obstacle_range: f64,
    pub desired_speed: f64,
}

impl Default for SfmParams {
    fn default() -> Self {
        SfmParams {
            relaxation_time: 0.5,
            interaction_strength: 2.0,
            interaction_range: 0.3,
            obstacle_strength: 4.0,
            obstacle_range: 0.2,
            desired_speed: 1.0,
        }
    }
}

/// Speed multiplier an SFM agent may reach above its desired speed.
pub const SFM_SPEED_CAP_FACTOR: f64 = 1.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum HumanPolicy {
    Orca(OrcaParams),
    Sfm(SfmParams),
}

impl HumanPolicy {
    /// Hard bound on the speed this policy can produce.
    pub fn speed_cap(&self) -> f64 {
        match self {
            HumanPolicy::Orca(p) => p.max_speed,
            HumanPolicy::Sfm(p) => p.desired_speed * SFM_SPEED_CAP_FACTOR,
        }
    }

    /// Speed the agent aims for when heading to a goal.
    pub fn cruise_speed(&self) -> f64 {
        match self {
            HumanPolicy::Orca(p) => p.max_speed,
            HumanPolicy::Sfm(p) => p.desired_speed,
        }
    }
}

/// Truncation width of the parameter distribution, in standard deviations.
const PARAM_TRUNCATION: f64 = 2.0;

fn jitter(rng: &mut Rng, mean: f64, rel_std: f64) -> f64 {
    rng.truncated_gaussian(mean, mean.abs() * rel_std, PARAM_TRUNCATION)
        .max(f64::MIN_POSITIVE)
}

impl OrcaParams {
    /// Per-human draw around these means with the given relative std-dev.
    pub fn sample(&self, rng: &mut Rng, rel_std: f64) -> OrcaParams {
        OrcaParams {
            time_horizon: jitter(rng, self.time_horizon, rel_std),
            time_horizon_obstacles: jitter(rng, self.time_horizon_obstacles, rel_std),
            neighbor_dist: jitter(rng, self.neighbor_dist, rel_std),
            max_neighbors: self.max_neighbors,
            max_speed: jitter(rng, self.max_speed, rel_std),
        }
    }
}

impl SfmParams {
    pub fn sample(&self, rng: &mut Rng, rel_std: f64) -> SfmParams {
        SfmParams {
            relaxation_time: jitter(rng, self.relaxation_time, rel_std),
            interaction_strength: jitter(rng, self.interaction_strength, rel_std),
            interaction_range: jitter(rng, self.interaction_range, rel_std),
            obstacle_strength: jitter(rng, self.obstacle_strength, rel_std),
            obstacle_range: jitter(rng, self.obstacle_range, rel_std),
            desired_speed: jitter(rng, self.desired_speed, rel_std),
        }
    }
}

/// Velocity pointing at `goal` at `speed`, slowed so the agent lands on the
/// goal instead of overshooting within one tick.
pub fn preferred_velocity(position: Vec2, goal: Vec2, speed: f64, dt: f64) -> Vec2 {
    let to_goal = goal - position;
    let dist = to_goal.length();
    if dist == 0.0 {
        return Vec2::ZERO;
    }
    if dist < speed * dt {
        to_goal / dt
    } else {
        to_goal * (speed / dist)
    }
}
