//! Optimal Reciprocal Collision Avoidance.
//!
//! Each neighbour contributes one half-plane of permitted velocities built from
//! its truncated velocity obstacle; walls contribute hard half-planes bounding
//! the approach speed toward their closest point. The chosen velocity is the
//! one nearest the preferred velocity inside all of them.

use alloc::vec::Vec;

use crate::entity::Entity;
use crate::geometry::{point_segment_distance, Vec2, Velocity2D, Wall};

use super::lp::{self, Line};
use super::{Neighbor, OrcaParams};

/// Share of the avoidance effort taken by each side of a reciprocal pair.
const RECIPROCITY: f64 = 0.5;

/// Half-plane constraints for an agent. Wall lines come first; the second
/// element is how many of them there are.
pub fn orca_lines(
    position: Vec2,
    velocity: Vec2,
    radius: f64,
    neighbors: &[Neighbor],
    walls: &[Wall],
    params: &OrcaParams,
    dt: f64,
) -> (Vec<Line>, usize) {
    let mut lines = Vec::with_capacity(walls.len() + neighbors.len());

    for wall in walls {
        let closest = wall.closest_point(position);
        let center_dist = point_segment_distance(position, wall.a, wall.b);
        let surface = center_dist - radius - wall.thickness / 2.0;
        if surface >= params.neighbor_dist {
            continue;
        }
        let away = if center_dist > 0.0 {
            (position - closest) / center_dist
        } else {
            // Centre exactly on the wall line: push along the wall normal.
            (wall.b - wall.a).perp().normalize_or_zero()
        };
        // Require v·away >= offset.
        let offset = if surface > 0.0 {
            -surface / params.time_horizon_obstacles
        } else {
            (-surface / dt).min(params.max_speed)
        };
        lines.push(Line {
            point: away * offset,
            direction: Vec2::new(away.y, -away.x),
        });
    }
    let hard = lines.len();

    let mut selected: Vec<(f64, &Neighbor)> = neighbors
        .iter()
        .filter_map(|n| {
            let d2 = (n.position - position).length_squared();
            (d2 <= params.neighbor_dist * params.neighbor_dist).then_some((d2, n))
        })
        .collect();
    // Stable: equal distances keep input order.
    selected.sort_by(|a, b| a.0.total_cmp(&b.0));
    selected.truncate(params.max_neighbors as usize);

    for (_, n) in selected {
        lines.push(neighbor_line(
            position,
            velocity,
            radius,
            n,
            params.time_horizon,
            dt,
        ));
    }
    (lines, hard)
}

fn neighbor_line(
    position: Vec2,
    velocity: Vec2,
    radius: f64,
    other: &Neighbor,
    horizon: f64,
    dt: f64,
) -> Line {
    let rel_pos = other.position - position;
    let rel_vel = velocity - other.velocity;
    let dist_sq = rel_pos.length_squared();
    let combined = radius + other.radius;
    let combined_sq = combined * combined;

    let direction;
    let u;
    if dist_sq > combined_sq {
        let inv_horizon = 1.0 / horizon;
        // Vector from the cut-off centre to the relative velocity.
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(rel_pos);

        if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
            // Project on the cut-off circle.
            let w_len = libm::sqrt(w_len_sq);
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined * inv_horizon - w_len);
        } else {
            // Project on a leg. A relative velocity exactly on the axis picks
            // the left leg, so head-on agents both swerve to their left.
            let leg = libm::sqrt(dist_sq - combined_sq);
            direction = if rel_pos.det(w) >= 0.0 {
                Vec2::new(
                    rel_pos.x * leg - rel_pos.y * combined,
                    rel_pos.x * combined + rel_pos.y * leg,
                ) / dist_sq
            } else {
                -Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined,
                    -rel_pos.x * combined + rel_pos.y * leg,
                ) / dist_sq
            };
            let dot2 = rel_vel.dot(direction);
            u = direction * dot2 - rel_vel;
        }
    } else {
        // Already overlapping: resolve within one tick.
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.length();
        let unit_w = if w_len > 0.0 {
            w / w_len
        } else {
            -rel_pos.normalize_or_zero()
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined * inv_dt - w_len);
    }

    let share = if other.reciprocal { RECIPROCITY } else { 1.0 };
    Line {
        point: velocity + u * share,
        direction,
    }
}

/// New velocity for `agent`, as close to `preferred` as the constraints allow
/// and never faster than `params.max_speed`. Angular velocity is left at zero;
/// headings are derived from motion by the integrator.
pub fn orca_velocity(
    agent: &Entity,
    neighbors: &[Neighbor],
    walls: &[Wall],
    params: &OrcaParams,
    preferred: Vec2,
    dt: f64,
) -> Velocity2D {
    let (lines, hard) = orca_lines(
        agent.position(),
        agent.velocity.linear(),
        agent.radius,
        neighbors,
        walls,
        params,
        dt,
    );
    let mut v = lp::solve(&lines, hard, params.max_speed, preferred);
    let speed = v.length();
    if speed > params.max_speed {
        v = v * (params.max_speed / speed);
    }
    if !v.is_finite() {
        v = Vec2::ZERO;
    }
    Velocity2D::new(v.x, v.y, 0.0)
}
