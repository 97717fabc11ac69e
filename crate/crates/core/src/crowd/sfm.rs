//! Social Force Model: goal attraction with exponential repulsion from other
//! discs and walls, integrated with one explicit Euler step.

use crate::entity::Entity;
use crate::geometry::{point_segment_distance, Vec2, Velocity2D, Wall};

use super::{Neighbor, SfmParams, SFM_SPEED_CAP_FACTOR};

/// Total force (per unit mass) acting on the agent.
pub fn social_force(
    agent: &Entity,
    neighbors: &[Neighbor],
    walls: &[Wall],
    params: &SfmParams,
    goal: Vec2,
) -> Vec2 {
    let pos = agent.position();
    let vel = agent.velocity.linear();

    let heading = (goal - pos).normalize_or_zero();
    let mut force = (heading * params.desired_speed - vel) / params.relaxation_time;

    for n in neighbors {
        let diff = pos - n.position;
        let d = diff.length();
        if d == 0.0 {
            continue;
        }
        let magnitude = params.interaction_strength
            * libm::exp((agent.radius + n.radius - d) / params.interaction_range);
        force += diff * (magnitude / d);
    }

    for wall in walls {
        let closest = wall.closest_point(pos);
        let d = point_segment_distance(pos, wall.a, wall.b);
        if d == 0.0 {
            continue;
        }
        let magnitude = params.obstacle_strength
            * libm::exp((agent.radius + wall.thickness / 2.0 - d) / params.obstacle_range);
        force += (pos - closest) * (magnitude / d);
    }
    force
}

/// Velocity after one Euler step of the social force, capped at
/// `1.3 × desired_speed`.
pub fn sfm_velocity(
    agent: &Entity,
    neighbors: &[Neighbor],
    walls: &[Wall],
    params: &SfmParams,
    goal: Vec2,
    dt: f64,
) -> Velocity2D {
    let force = social_force(agent, neighbors, walls, params, goal);
    let mut v = agent.velocity.linear() + force * dt;
    let cap = params.desired_speed * SFM_SPEED_CAP_FACTOR;
    let speed = v.length();
    if speed > cap {
        v = v * (cap / speed);
    }
    if !v.is_finite() {
        v = Vec2::ZERO;
    }
    Velocity2D::new(v.x, v.y, 0.0)
}
