//! Robot kinematics, collision checks and the world tick.

use alloc::vec::Vec;

use core::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::config::{ActionSpace, Steering};
use crate::crowd::{orca_velocity, preferred_velocity, sfm_velocity, HumanPolicy, Neighbor};
use crate::entity::EntityId;
use crate::error::{ActionError, ScenarioError};
use crate::geometry::{
    circle_circle_dist, segment_circle_dist, within_fov, Pose2D, Vec2, Velocity2D,
};
use crate::scenario::{Behavior, World};

/// Speeds below this count as standing still (m/s).
const MOVING_SPEED: f64 = 1e-3;

/// Relative slack when checking continuous actions against their caps.
const CAP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Discrete {
        index: usize,
    },
    /// Forward speed and turn rate.
    ContinuousNonHolonomic {
        v: f64,
        omega: f64,
    },
    /// World-frame velocity and turn rate.
    ContinuousHolonomic {
        vx: f64,
        vy: f64,
        omega: f64,
    },
}

impl Action {
    pub const STOP_NON_HOLONOMIC: Action = Action::ContinuousNonHolonomic { v: 0.0, omega: 0.0 };

    fn kind(&self) -> &'static str {
        match self {
            Action::Discrete { .. } => "discrete",
            Action::ContinuousNonHolonomic { .. } => "non-holonomic",
            Action::ContinuousHolonomic { .. } => "holonomic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedCaps {
    pub v_max: f64,
    pub omega_max: f64,
}

pub fn action_table_size(steering: Steering) -> usize {
    match steering {
        Steering::NonHolonomic => 7,
        Steering::Holonomic => 9,
    }
}

/// Continuous command for a discrete action index.
///
/// Non-holonomic: stop, forward, half forward, turn left, turn right, arc
/// left, arc right. Holonomic: stop, then E, NE, N, NW, W, SW, S, SE.
pub fn decode_discrete(
    index: usize,
    steering: Steering,
    caps: SpeedCaps,
) -> Result<Action, ActionError> {
    let size = action_table_size(steering);
    if index >= size {
        return Err(ActionError::IndexOutOfRange { index, size });
    }
    let SpeedCaps {
        v_max: v,
        omega_max: w,
    } = caps;
    Ok(match steering {
        Steering::NonHolonomic => {
            let (v, omega) = [
                (0.0, 0.0),
                (v, 0.0),
                (v / 2.0, 0.0),
                (0.0, w),
                (0.0, -w),
                (v / 2.0, w / 2.0),
                (v / 2.0, -w / 2.0),
            ][index];
            Action::ContinuousNonHolonomic { v, omega }
        }
        Steering::Holonomic => {
            let d = FRAC_1_SQRT_2;
            let (x, y) = [
                (0.0, 0.0),
                (1.0, 0.0),
                (d, d),
                (0.0, 1.0),
                (-d, d),
                (-1.0, 0.0),
                (-d, -d),
                (0.0, -1.0),
                (d, -d),
            ][index];
            Action::ContinuousHolonomic {
                vx: x * v,
                vy: y * v,
                omega: 0.0,
            }
        }
    })
}

/// Checks an action against the robot configuration and returns its
/// continuous form.
pub fn resolve_action(
    action: &Action,
    steering: Steering,
    space: ActionSpace,
    caps: SpeedCaps,
) -> Result<Action, ActionError> {
    let expected = match (space, steering) {
        (ActionSpace::Discrete, _) => "discrete",
        (ActionSpace::Continuous, Steering::NonHolonomic) => "non-holonomic",
        (ActionSpace::Continuous, Steering::Holonomic) => "holonomic",
    };
    if action.kind() != expected {
        return Err(ActionError::SpaceMismatch(action.kind(), expected));
    }
    let check = |name: &'static str, value: f64, cap: f64| -> Result<(), ActionError> {
        if !value.is_finite() {
            return Err(ActionError::NonFinite(name));
        }
        if value.abs() > cap * (1.0 + CAP_SLACK) {
            return Err(ActionError::OverCap { name, value, cap });
        }
        Ok(())
    };
    match *action {
        Action::Discrete { index } => decode_discrete(index, steering, caps),
        Action::ContinuousNonHolonomic { v, omega } => {
            check("v", v, caps.v_max)?;
            check("omega", omega, caps.omega_max)?;
            Ok(*action)
        }
        Action::ContinuousHolonomic { vx, vy, omega } => {
            check("vx", vx, caps.v_max)?;
            check("vy", vy, caps.v_max)?;
            check("speed", libm::hypot(vx, vy), caps.v_max)?;
            check("omega", omega, caps.omega_max)?;
            Ok(*action)
        }
    }
}

/// World-frame velocity produced by a continuous action at heading `theta`.
pub fn action_velocity(action: &Action, theta: f64) -> Velocity2D {
    match *action {
        Action::Discrete { .. } => Velocity2D::ZERO,
        Action::ContinuousNonHolonomic { v, omega } => {
            Velocity2D::new(v * libm::cos(theta), v * libm::sin(theta), omega)
        }
        Action::ContinuousHolonomic { vx, vy, omega } => Velocity2D::new(vx, vy, omega),
    }
}

/// Pose after applying a continuous action for `dt`. Discrete actions must be
/// decoded first; passed here they leave the pose unchanged.
pub fn apply_robot_action(pose: Pose2D, action: &Action, dt: f64) -> Pose2D {
    let vel = action_velocity(action, pose.theta);
    let mut next = pose;
    next.x += vel.vx * dt;
    next.y += vel.vy * dt;
    if vel.omega != 0.0 {
        next.set_theta(pose.theta + vel.omega * dt);
    }
    next
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub human: bool,
    pub object: bool,
    pub wall: bool,
    pub out_of_map: bool,
    /// Humans and objects touching the robot.
    pub ids: Vec<EntityId>,
}

impl CollisionReport {
    pub fn collision(&self) -> bool {
        self.human || self.object || self.wall
    }
}

pub fn detect_collisions(world: &World) -> CollisionReport {
    let robot = &world.robot.entity;
    let p = robot.position();
    let mut report = CollisionReport::default();
    for h in &world.humans {
        if circle_circle_dist(p, robot.radius, h.entity.position(), h.entity.radius) <= 0.0 {
            report.human = true;
            report.ids.push(h.entity.id);
        }
    }
    for o in &world.objects {
        if circle_circle_dist(p, robot.radius, o.position(), o.radius) <= 0.0 {
            report.object = true;
            report.ids.push(o.id);
        }
    }
    report.wall = world
        .walls
        .iter()
        .any(|w| segment_circle_dist(w, p, robot.radius) <= 0.0);
    report.out_of_map = !world.contains_point(p);
    report
}

/// Neighbours a human reacts to, taken from the current snapshot.
fn neighbors_of(world: &World, index: usize) -> Vec<Neighbor> {
    let me = &world.humans[index];
    let limit = world.settings.fov_limits_policy;
    let visible = |p: Vec2| !limit || within_fov(&me.entity.pose, me.fov_deg, p);
    let mut out = Vec::with_capacity(world.humans.len() + world.objects.len());
    for (j, h) in world.humans.iter().enumerate() {
        if j != index && visible(h.entity.position()) {
            out.push(Neighbor {
                position: h.entity.position(),
                velocity: h.entity.velocity.linear(),
                radius: h.entity.radius,
                reciprocal: !h.is_static(),
            });
        }
    }
    for o in world.obstacles() {
        if visible(o.position()) {
            out.push(Neighbor {
                position: o.position(),
                velocity: Vec2::ZERO,
                radius: o.radius,
                reciprocal: false,
            });
        }
    }
    let robot = &world.robot.entity;
    if me.considers_robot && visible(robot.position()) {
        out.push(Neighbor {
            position: robot.position(),
            velocity: robot.velocity.linear(),
            radius: robot.radius,
            reciprocal: false,
        });
    }
    out
}

fn human_velocity(world: &World, index: usize) -> Velocity2D {
    let h = &world.humans[index];
    if h.is_static() {
        return Velocity2D::ZERO;
    }
    let neighbors = neighbors_of(world, index);
    let dt = world.settings.dt;
    match &h.policy {
        HumanPolicy::Orca(p) => {
            let preferred = preferred_velocity(h.entity.position(), h.goal, p.max_speed, dt);
            orca_velocity(&h.entity, &neighbors, &world.walls, p, preferred, dt)
        }
        HumanPolicy::Sfm(p) => sfm_velocity(&h.entity, &neighbors, &world.walls, p, h.goal, dt),
    }
}

/// Advances the world by one tick. `robot_action` must already be resolved to
/// its continuous form.
pub fn integrate(world: &mut World, robot_action: &Action) -> Result<(), ScenarioError> {
    let dt = world.settings.dt;

    let velocities: Vec<Velocity2D> = (0..world.humans.len())
        .map(|i| human_velocity(world, i))
        .collect();

    let robot = &mut world.robot.entity;
    let vel = action_velocity(robot_action, robot.pose.theta);
    robot.pose = apply_robot_action(robot.pose, robot_action, dt);
    robot.velocity = vel;

    for (h, v) in world.humans.iter_mut().zip(velocities) {
        let old_theta = h.entity.pose.theta;
        let pos = h.entity.position() + v.linear() * dt;
        h.entity.pose.set_position(pos);
        let heading = if v.speed() > MOVING_SPEED {
            Some(v.linear().angle())
        } else {
            match h.behavior {
                Behavior::Static { face: Some(p) } | Behavior::Approach { face: p } if p != pos => {
                    Some((p - pos).angle())
                }
                _ => None,
            }
        };
        if let Some(theta) = heading {
            h.entity.pose.set_theta(theta);
        }
        let turn = crate::geometry::wrap_angle(h.entity.pose.theta - old_theta);
        h.entity.velocity = Velocity2D::new(v.vx, v.vy, turn / dt);
    }

    let next_step = world.step_index + 1;
    while world
        .pending_events
        .first()
        .is_some_and(|e| e.at_step <= next_step)
    {
        let event = world.pending_events.remove(0);
        world.apply_event(&event)?;
    }

    update_goals(world)?;
    world.step_index = next_step;
    Ok(())
}

fn update_goals(world: &mut World) -> Result<(), ScenarioError> {
    let tol = world.settings.goal_tolerance;
    for i in 0..world.humans.len() {
        let h = &world.humans[i];
        if h.entity.position().distance(h.goal) >= tol {
            continue;
        }
        match h.behavior {
            Behavior::Wander => {
                let goal = world.resample_goal_for(i)?;
                world.humans[i].goal = goal;
            }
            Behavior::Approach { face } => {
                let h = &mut world.humans[i];
                h.behavior = Behavior::Static { face: Some(face) };
                h.goal = h.entity.position();
            }
            Behavior::Static { .. } | Behavior::Group { .. } => {}
        }
    }

    for k in 0..world.interactions.len() {
        if !world.interactions[k].moving {
            continue;
        }
        let id = world.interactions[k].id;
        let members: Vec<usize> = world
            .humans
            .iter()
            .enumerate()
            .filter(|(_, h)| matches!(h.behavior, Behavior::Group { crowd, .. } if crowd == id))
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let centroid = members.iter().fold(Vec2::ZERO, |acc, &i| {
            acc + world.humans[i].entity.position()
        }) / members.len() as f64;
        if let crate::scenario::InteractionKind::HumanCrowd { center, .. } =
            &mut world.interactions[k].kind
        {
            *center = centroid;
        }
        let goal = world.interactions[k].goal.unwrap_or(centroid);
        if centroid.distance(goal) >= tol {
            continue;
        }
        let offsets: Vec<Vec2> = members
            .iter()
            .map(|&i| match world.humans[i].behavior {
                Behavior::Group { offset, .. } => offset,
                _ => Vec2::ZERO,
            })
            .collect();
        let next = world.resample_crowd_goal(&offsets, goal)?;
        world.interactions[k].goal = Some(next);
        for (&i, o) in members.iter().zip(offsets) {
            world.humans[i].goal = next + o;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ScenarioConfig};
    use crate::geometry::Wall;
    use crate::scenario::generate;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    const CAPS: SpeedCaps = SpeedCaps {
        v_max: 1.0,
        omega_max: 2.0,
    };

    #[test]
    fn discrete_tables() {
        assert_eq!(
            decode_discrete(0, Steering::NonHolonomic, CAPS).unwrap(),
            Action::STOP_NON_HOLONOMIC
        );
        let slow = SpeedCaps {
            v_max: 0.1,
            omega_max: 1.0,
        };
        assert_eq!(
            decode_discrete(1, Steering::NonHolonomic, slow).unwrap(),
            Action::ContinuousNonHolonomic { v: 0.1, omega: 0.0 }
        );
        assert_eq!(
            decode_discrete(1, Steering::Holonomic, CAPS).unwrap(),
            Action::ContinuousHolonomic {
                vx: 1.0,
                vy: 0.0,
                omega: 0.0
            }
        );
        assert_eq!(
            decode_discrete(7, Steering::NonHolonomic, CAPS),
            Err(ActionError::IndexOutOfRange { index: 7, size: 7 })
        );
        for i in 0..9 {
            let Action::ContinuousHolonomic { vx, vy, .. } =
                decode_discrete(i, Steering::Holonomic, CAPS).unwrap()
            else {
                panic!()
            };
            let speed = libm::hypot(vx, vy);
            assert!(if i == 0 {
                speed == 0.0
            } else {
                (speed - 1.0).abs() < 1e-12
            });
        }
    }

    #[test]
    fn resolve_rejects_mismatch_and_over_cap() {
        let a = Action::Discrete { index: 1 };
        assert!(matches!(
            resolve_action(&a, Steering::NonHolonomic, ActionSpace::Continuous, CAPS),
            Err(ActionError::SpaceMismatch(..))
        ));
        let fast = Action::ContinuousNonHolonomic { v: 1.5, omega: 0.0 };
        assert!(matches!(
            resolve_action(&fast, Steering::NonHolonomic, ActionSpace::Continuous, CAPS),
            Err(ActionError::OverCap { .. })
        ));
        let nan = Action::ContinuousHolonomic {
            vx: f64::NAN,
            vy: 0.0,
            omega: 0.0,
        };
        assert!(matches!(
            resolve_action(&nan, Steering::Holonomic, ActionSpace::Continuous, CAPS),
            Err(ActionError::NonFinite("vx"))
        ));
    }

    #[test]
    fn unicycle_examples() {
        let p = apply_robot_action(
            Pose2D::new(0.0, 0.0, 0.0),
            &Action::ContinuousNonHolonomic { v: 1.0, omega: 0.0 },
            0.1,
        );
        assert_eq!(p, Pose2D::new(0.1, 0.0, 0.0));
        let p = apply_robot_action(
            Pose2D::new(0.0, 0.0, 0.0),
            &Action::ContinuousNonHolonomic { v: 0.0, omega: PI },
            1.0,
        );
        assert_eq!(p, Pose2D::new(0.0, 0.0, PI));
        let p = apply_robot_action(
            Pose2D::new(0.0, 0.0, FRAC_PI_2),
            &Action::ContinuousNonHolonomic { v: 1.0, omega: 0.0 },
            0.1,
        );
        assert!(p.x.abs() < 1e-15 && (p.y - 0.1).abs() < 1e-15 && p.theta == FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn unicycle_preserves_what_it_should(x in -5.0f64..5.0, y in -5.0f64..5.0, th in -3.0f64..3.0, v in -1.0f64..1.0, w in -2.0f64..2.0) {
            let pose = Pose2D::new(x, y, th);
            let straight = apply_robot_action(pose, &Action::ContinuousNonHolonomic { v, omega: 0.0 }, 0.1);
            prop_assert_eq!(straight.theta, pose.theta);
            let spin = apply_robot_action(pose, &Action::ContinuousNonHolonomic { v: 0.0, omega: w }, 0.1);
            prop_assert_eq!((spin.x, spin.y), (pose.x, pose.y));
        }
    }

    fn empty_world() -> World {
        generate(&ScenarioConfig::default()).unwrap()
    }

    #[test]
    fn collision_examples() {
        let mut w = generate(&preset(1).unwrap()).unwrap();
        w.objects.clear();
        w.robot.entity.pose = Pose2D::new(0.0, 0.0, 0.0);
        w.humans[0].entity.pose = Pose2D::new(0.5, 0.0, 0.0);
        let r = detect_collisions(&w);
        assert!(r.human && r.collision() && !r.object && !r.wall && !r.out_of_map);
        assert_eq!(r.ids, alloc::vec![w.humans[0].entity.id]);

        w.humans[0].entity.pose = Pose2D::new(2.3, 0.0, 0.0);
        assert_eq!(detect_collisions(&w), CollisionReport::default());

        w.robot.entity.pose = Pose2D::new(5.01, 0.0, 0.0);
        let r = detect_collisions(&w);
        assert!(r.out_of_map && r.wall);
    }

    #[test]
    fn empty_room_stop_is_fixed_point() {
        let mut w = empty_world();
        let before = w.clone();
        integrate(&mut w, &Action::STOP_NON_HOLONOMIC).unwrap();
        assert_eq!(w.step_index, 1);
        w.step_index = 0;
        assert!(w.same_state(&before));
    }

    #[test]
    fn human_at_goal_gets_new_goal() {
        let mut w = generate(&preset(1).unwrap().with_seed(3)).unwrap();
        let pos = w.humans[0].entity.position();
        w.humans[0].goal = pos;
        integrate(&mut w, &Action::STOP_NON_HOLONOMIC).unwrap();
        assert_ne!(w.humans[0].goal, pos);
    }

    #[test]
    fn integrate_is_deterministic_and_never_teleports() {
        for k in 1..=3 {
            let mut a = generate(&preset(k).unwrap().with_seed(k as u64)).unwrap();
            let mut b = a.clone();
            for step in 0..200 {
                let action = Action::ContinuousNonHolonomic {
                    v: 0.5,
                    omega: if step % 20 < 10 { 1.0 } else { -1.0 },
                };
                let prev = a.clone();
                integrate(&mut a, &action).unwrap();
                integrate(&mut b, &action).unwrap();
                assert_eq!(a, b);
                for (h0, h1) in prev.humans.iter().zip(&a.humans) {
                    let moved = h0.entity.position().distance(h1.entity.position());
                    assert!(moved <= h0.policy.speed_cap() * a.settings.dt * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn ignoring_robot_makes_humans_blind_to_it() {
        let mut cfg = preset(2).unwrap().with_seed(4);
        cfg.humans.consider_robot = false;
        let mut a = generate(&cfg).unwrap();
        let mut b = a.clone();
        // Park b's robot right next to a human.
        let h = b.humans[0].entity.position();
        b.robot.entity.pose = Pose2D::new(h.x + 0.7, h.y, 0.0);
        for _ in 0..50 {
            integrate(&mut a, &Action::STOP_NON_HOLONOMIC).unwrap();
            integrate(&mut b, &Action::STOP_NON_HOLONOMIC).unwrap();
            assert_eq!(a.humans, b.humans);
        }
    }

    #[test]
    fn detect_collisions_matches_brute_force() {
        let mut seed = 0u64;
        let mut rng = crate::rng::Rng::seed_from_u64(99);
        for _ in 0..1000 {
            seed += 1;
            let mut w = generate(&preset(2).unwrap().with_seed(seed % 50)).unwrap();
            let p = Vec2::new(rng.range(-5.5, 5.5), rng.range(-5.5, 5.5));
            w.robot.entity.pose.set_position(p);
            let r = detect_collisions(&w);
            let rr = w.robot.entity.radius;
            let touch = |q: Vec2, rq: f64| (p - q).length() <= rr + rq;
            let human = w
                .humans
                .iter()
                .any(|h| touch(h.entity.position(), h.entity.radius));
            let object = w.objects.iter().any(|o| touch(o.position(), o.radius));
            let wall = w.walls.iter().any(|wl: &Wall| {
                let ab = wl.b - wl.a;
                let t = ((p - wl.a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
                (p - (wl.a + ab * t)).length() <= rr + wl.thickness / 2.0
            });
            let outside = p.x.abs() >= 5.0 || p.y.abs() >= 5.0;
            assert_eq!((r.human, r.object, r.wall), (human, object, wall));
            if p.x.abs() != 5.0 && p.y.abs() != 5.0 {
                assert_eq!(r.out_of_map, outside);
            }
        }
    }
}
