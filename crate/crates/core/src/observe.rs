//! Observation assembly: frame change, field-of-view and range filtering,
//! gaze flags, relationship adjacency and sensor noise.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{Frame, NoiseConfig, NoiseSpec, ScenarioConfig};
use crate::entity::{EntityId, EntityKind};
use crate::geometry::{
    clip_segment_to_disc, within_fov, wrap_angle, Pose2D, Vec2, Velocity2D, Wall,
};
use crate::rng::Rng;
use crate::scenario::{InteractionKind, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub frame: Frame,
    pub robot_fov_deg: f64,
    /// `None` means unlimited range.
    pub robot_range: Option<f64>,
    pub include_relationships: bool,
    pub noise: NoiseConfig,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig::from(&ScenarioConfig::default())
    }
}

impl From<&ScenarioConfig> for ObservationConfig {
    fn from(c: &ScenarioConfig) -> Self {
        ObservationConfig {
            frame: c.observation.frame,
            robot_fov_deg: c.observation.robot_fov_deg,
            robot_range: c.observation.robot_range.filter(|r| r.is_finite()),
            include_relationships: c.observation.include_relationships,
            noise: c.noise.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedHuman {
    pub id: EntityId,
    pub pose: Pose2D,
    pub velocity: Velocity2D,
    pub radius: f64,
    /// Whether the robot is inside this human's field of view.
    pub gaze: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservedObject {
    pub id: EntityId,
    pub kind: EntityKind,
    pub pose: Pose2D,
    pub velocity: Velocity2D,
    pub radius: f64,
}

/// Symmetric 0/1 adjacency over `ids`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Relationships {
    pub ids: Vec<EntityId>,
    pub matrix: Vec<Vec<u8>>,
}

impl Relationships {
    pub fn connected(&self, a: EntityId, b: EntityId) -> bool {
        let find = |id| self.ids.iter().position(|&x| x == id);
        match (find(a), find(b)) {
            (Some(i), Some(j)) => self.matrix[i][j] == 1,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub goal: Vec2,
    pub humans: Vec<ObservedHuman>,
    pub objects: Vec<ObservedObject>,
    pub walls: Vec<Wall>,
    pub relationships: Relationships,
}

/// Key names of a serialized observation.
pub const OBSERVATION_KEYS: [&str; 5] = ["goal", "humans", "objects", "walls", "relationships"];

/// True iff `robot` lies within the human's field of view (inclusive).
pub fn gaze_flag(human: &Pose2D, fov_deg: f64, robot: Vec2) -> bool {
    within_fov(human, fov_deg, robot)
}

/// Adjacency restricted to `ids`: crowd members pairwise and human-laptop
/// pairs are connected.
pub fn relationships(world: &World, ids: &[EntityId]) -> Relationships {
    let n = ids.len();
    let mut matrix = alloc::vec![alloc::vec![0u8; n]; n];
    let index = |id: EntityId| ids.iter().position(|&x| x == id);
    let mut link = |a: EntityId, b: EntityId| {
        if let (Some(i), Some(j)) = (index(a), index(b)) {
            if i != j {
                matrix[i][j] = 1;
                matrix[j][i] = 1;
            }
        }
    };
    for interaction in &world.interactions {
        match &interaction.kind {
            InteractionKind::HumanCrowd { members, .. } => {
                for (k, &a) in members.iter().enumerate() {
                    for &b in &members[k + 1..] {
                        link(a, b);
                    }
                }
            }
            InteractionKind::HumanLaptop { human, laptop } => link(*human, *laptop),
        }
    }
    Relationships {
        ids: ids.to_vec(),
        matrix,
    }
}

struct Sensor<'a> {
    robot: Pose2D,
    cfg: &'a ObservationConfig,
}

impl Sensor<'_> {
    fn sees(&self, p: Vec2) -> bool {
        let in_range = self
            .cfg
            .robot_range
            .is_none_or(|r| self.robot.position().distance(p) <= r);
        in_range && within_fov(&self.robot, self.cfg.robot_fov_deg, p)
    }

    fn point(&self, p: Vec2) -> Vec2 {
        match self.cfg.frame {
            Frame::Robot => self.robot.to_local(p),
            Frame::Global => p,
        }
    }

    fn pose(&self, p: Pose2D) -> Pose2D {
        match self.cfg.frame {
            Frame::Robot => {
                let q = self.robot.to_local(p.position());
                Pose2D {
                    x: q.x,
                    y: q.y,
                    theta: wrap_angle(p.theta - self.robot.theta),
                }
            }
            Frame::Global => p,
        }
    }

    fn velocity(&self, v: Velocity2D) -> Velocity2D {
        match self.cfg.frame {
            Frame::Robot => {
                let l = v.linear().rotate(-self.robot.theta);
                Velocity2D::new(l.x, l.y, v.omega)
            }
            Frame::Global => v,
        }
    }
}

fn jitter(rng: &mut Rng, spec: Option<NoiseSpec>, value: f64) -> f64 {
    match spec {
        Some(s) if s.std != 0.0 || s.mean != 0.0 => value + rng.gaussian(s.mean, s.std),
        _ => value,
    }
}

fn noisy_pose(rng: &mut Rng, spec: Option<NoiseSpec>, p: Pose2D) -> Pose2D {
    Pose2D {
        x: jitter(rng, spec, p.x),
        y: jitter(rng, spec, p.y),
        theta: p.theta,
    }
}

fn noisy_velocity(rng: &mut Rng, spec: Option<NoiseSpec>, v: Velocity2D) -> Velocity2D {
    Velocity2D::new(jitter(rng, spec, v.vx), jitter(rng, spec, v.vy), v.omega)
}

/// Builds the robot's observation. `rng` is only drawn from when noise is
/// configured.
pub fn observe(world: &World, cfg: &ObservationConfig, rng: &mut Rng) -> Observation {
    let robot = world.robot.entity.pose;
    let sensor = Sensor { robot, cfg };
    let noise = &cfg.noise;

    let humans: Vec<ObservedHuman> = world
        .humans
        .iter()
        .filter(|h| sensor.sees(h.entity.position()))
        .map(|h| ObservedHuman {
            id: h.entity.id,
            pose: noisy_pose(rng, noise.humans, sensor.pose(h.entity.pose)),
            velocity: noisy_velocity(rng, noise.humans, sensor.velocity(h.entity.velocity)),
            radius: h.entity.radius,
            gaze: gaze_flag(&h.entity.pose, h.fov_deg, robot.position()),
        })
        .collect();

    let objects: Vec<ObservedObject> = world
        .objects
        .iter()
        .filter(|o| sensor.sees(o.position()))
        .map(|o| ObservedObject {
            id: o.id,
            kind: o.kind,
            pose: noisy_pose(rng, noise.objects, sensor.pose(o.pose)),
            velocity: noisy_velocity(rng, noise.objects, sensor.velocity(o.velocity)),
            radius: o.radius,
        })
        .collect();

    let walls: Vec<Wall> = world
        .walls
        .iter()
        .filter_map(|w| match cfg.robot_range {
            Some(r) => clip_segment_to_disc(w.a, w.b, robot.position(), r).map(|(a, b)| Wall {
                a,
                b,
                ..*w
            }),
            None => Some(*w),
        })
        .map(|w| {
            let (a, b) = (sensor.point(w.a), sensor.point(w.b));
            let a = Vec2::new(jitter(rng, noise.walls, a.x), jitter(rng, noise.walls, a.y));
            let b = Vec2::new(jitter(rng, noise.walls, b.x), jitter(rng, noise.walls, b.y));
            Wall {
                a,
                b,
                thickness: w.thickness,
            }
        })
        .collect();

    let relationships = if cfg.include_relationships {
        let ids: Vec<EntityId> = humans
            .iter()
            .map(|h| h.id)
            .chain(objects.iter().map(|o| o.id))
            .collect();
        relationships(world, &ids)
    } else {
        Relationships::default()
    };

    Observation {
        goal: sensor.point(world.goal.position),
        humans,
        objects,
        walls,
        relationships,
    }
}

impl Observation {
    /// Maps a robot-frame observation back to world coordinates.
    pub fn to_global(&self, robot: &Pose2D) -> Observation {
        let pose = |p: Pose2D| {
            let q = robot.to_world(p.position());
            Pose2D {
                x: q.x,
                y: q.y,
                theta: wrap_angle(p.theta + robot.theta),
            }
        };
        let vel = |v: Velocity2D| {
            let l = v.linear().rotate(robot.theta);
            Velocity2D::new(l.x, l.y, v.omega)
        };
        Observation {
            goal: robot.to_world(self.goal),
            humans: self
                .humans
                .iter()
                .map(|h| ObservedHuman {
                    pose: pose(h.pose),
                    velocity: vel(h.velocity),
                    ..h.clone()
                })
                .collect(),
            objects: self
                .objects
                .iter()
                .map(|o| ObservedObject {
                    pose: pose(o.pose),
                    velocity: vel(o.velocity),
                    ..o.clone()
                })
                .collect(),
            walls: self
                .walls
                .iter()
                .map(|w| Wall {
                    a: robot.to_world(w.a),
                    b: robot.to_world(w.b),
                    thickness: w.thickness,
                })
                .collect(),
            relationships: self.relationships.clone(),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.humans.len() + self.objects.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::scenario::generate;
    use core::f64::consts::PI;

    fn full(frame: Frame) -> ObservationConfig {
        ObservationConfig {
            frame,
            ..ObservationConfig::default()
        }
    }

    #[test]
    fn fully_observable_sees_everything() {
        for k in 1..=3 {
            let w = generate(&preset(k).unwrap().with_seed(k as u64)).unwrap();
            let o = observe(&w, &full(Frame::Global), &mut Rng::seed_from_u64(0));
            assert_eq!(o.entity_count(), w.census());
            assert_eq!(o.walls.len(), w.walls.len());
        }
    }

    fn one_human_world(hx: f64, hy: f64) -> World {
        let mut w = generate(&preset(1).unwrap()).unwrap();
        w.objects.clear();
        w.robot.entity.pose = Pose2D::new(0.0, 0.0, 0.0);
        w.humans[0].entity.pose = Pose2D::new(hx, hy, 0.0);
        w
    }

    #[test]
    fn fov_omits_entities_behind() {
        let w = one_human_world(-1.0, 0.0);
        let cfg = ObservationConfig {
            robot_fov_deg: 180.0,
            ..full(Frame::Global)
        };
        assert!(observe(&w, &cfg, &mut Rng::seed_from_u64(0))
            .humans
            .is_empty());
        let w = one_human_world(1.0, 0.0);
        assert_eq!(
            observe(&w, &cfg, &mut Rng::seed_from_u64(0)).humans.len(),
            1
        );
    }

    #[test]
    fn robot_frame_transform() {
        let mut w = one_human_world(2.0, 1.0);
        w.robot.entity.pose = Pose2D::new(1.0, 1.0, 0.0);
        let o = observe(&w, &full(Frame::Robot), &mut Rng::seed_from_u64(0));
        assert_eq!((o.humans[0].pose.x, o.humans[0].pose.y), (1.0, 0.0));
    }

    #[test]
    fn gaze_examples() {
        let h = Pose2D::new(0.0, 0.0, 0.0);
        assert!(gaze_flag(&h, 180.0, Vec2::new(1.0, 0.0)));
        assert!(!gaze_flag(&h, 180.0, Vec2::new(-1.0, 0.0)));
        assert!(gaze_flag(&h, 180.0, Vec2::new(0.0, 1.0)));
        assert!(gaze_flag(
            &Pose2D::new(0.0, 0.0, PI),
            360.0,
            Vec2::new(1.0, 0.0)
        ));
    }

    #[test]
    fn relationship_examples() {
        let w = generate(&preset(2).unwrap().with_seed(2)).unwrap();
        let crowd = w
            .interactions
            .iter()
            .find_map(|i| match &i.kind {
                InteractionKind::HumanCrowd { members, .. } if !i.moving => Some(members.clone()),
                _ => None,
            })
            .unwrap();
        let r = relationships(&w, &crowd);
        assert_eq!(
            r.matrix,
            alloc::vec![
                alloc::vec![0, 1, 1],
                alloc::vec![1, 0, 1],
                alloc::vec![1, 1, 0]
            ]
        );

        let pair = w.interactions.iter().find_map(|i| match i.kind {
            InteractionKind::HumanLaptop { human, .. } => Some(human),
            _ => None,
        });
        if let Some(human) = pair {
            let r = relationships(&w, &[human]);
            assert_eq!(r.matrix, alloc::vec![alloc::vec![0]]);
        }

        let empty = generate(&preset(1).unwrap()).unwrap();
        let ids: Vec<EntityId> = empty
            .humans
            .iter()
            .map(|h| h.entity.id)
            .chain(empty.objects.iter().map(|o| o.id))
            .collect();
        assert!(relationships(&empty, &ids)
            .matrix
            .iter()
            .flatten()
            .all(|&x| x == 0));
    }

    #[test]
    fn adjacency_symmetric_zero_diagonal() {
        for seed in 0..50 {
            let w = generate(&preset(3).unwrap().with_seed(seed)).unwrap();
            let o = observe(&w, &full(Frame::Robot), &mut Rng::seed_from_u64(seed));
            let m = &o.relationships.matrix;
            for i in 0..m.len() {
                assert_eq!(m[i][i], 0);
                for j in 0..m.len() {
                    assert_eq!(m[i][j], m[j][i]);
                }
            }
        }
    }

    #[test]
    fn frame_round_trip() {
        for seed in 0..50 {
            let w = generate(&preset(3).unwrap().with_seed(seed)).unwrap();
            let global = observe(&w, &full(Frame::Global), &mut Rng::seed_from_u64(0));
            let local = observe(&w, &full(Frame::Robot), &mut Rng::seed_from_u64(0));
            let back = local.to_global(&w.robot.entity.pose);
            let close = |a: Vec2, b: Vec2| a.distance(b) < 1e-12;
            assert!(close(back.goal, global.goal));
            for (a, b) in back.humans.iter().zip(&global.humans) {
                assert!(close(a.pose.position(), b.pose.position()));
                assert!(close(a.velocity.linear(), b.velocity.linear()));
            }
            for (a, b) in back.walls.iter().zip(&global.walls) {
                assert!(close(a.a, b.a) && close(a.b, b.b));
            }
        }
    }

    #[test]
    fn shrinking_range_never_adds() {
        let w = generate(&preset(3).unwrap().with_seed(9)).unwrap();
        let mut last = usize::MAX;
        for r in [20.0, 8.0, 5.0, 3.0, 1.0, 0.1] {
            let cfg = ObservationConfig {
                robot_range: Some(r),
                ..full(Frame::Robot)
            };
            let n = observe(&w, &cfg, &mut Rng::seed_from_u64(0)).entity_count();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn zero_noise_is_deterministic_and_noise_perturbs() {
        let w = generate(&preset(2).unwrap().with_seed(1)).unwrap();
        let quiet = ObservationConfig {
            noise: NoiseConfig {
                humans: Some(NoiseSpec {
                    mean: 0.0,
                    std: 0.0,
                }),
                ..NoiseConfig::default()
            },
            ..full(Frame::Robot)
        };
        let a = observe(&w, &quiet, &mut Rng::seed_from_u64(1));
        let b = observe(&w, &quiet, &mut Rng::seed_from_u64(2));
        assert_eq!(a, b);
        let loud = ObservationConfig {
            noise: NoiseConfig {
                humans: Some(NoiseSpec {
                    mean: 0.0,
                    std: 0.1,
                }),
                ..NoiseConfig::default()
            },
            ..full(Frame::Robot)
        };
        let c = observe(&w, &loud, &mut Rng::seed_from_u64(1));
        assert_ne!(a.humans[0].pose, c.humans[0].pose);
        assert_eq!(a.humans[0].radius, c.humans[0].radius);
    }
}
