//! Randomised scenario generation and the interaction lifecycle.

use alloc::string::String;
use alloc::vec::Vec;

use core::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::config::{CountRange, PolicyChoice, ScenarioConfig, Steering};
use crate::crowd::HumanPolicy;
use crate::entity::{Entity, EntityId, EntityKind};
use crate::error::ScenarioError;
use crate::geometry::{
    circle_circle_dist, point_in_polygon, segment_circle_dist, Pose2D, Vec2, Wall,
};
use crate::rng::Rng;
use crate::room::RoomShape;

/// Rejection-sampling budget per placed entity.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 1000;

/// Minimum free gap between spawned discs (m).
const SPAWN_GAP: f64 = 0.01;

/// Gap between a table edge and a human using a laptop on it (m).
const LAPTOP_STANDOFF: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub entity: Entity,
    pub steering: Steering,
}

/// How a human was spawned; fixed for the whole episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanRole {
    /// Wanders between random goals.
    Individual,
    /// Stands still on its own.
    Standing,
    StaticCrowd,
    DynamicCrowd,
    LaptopUser,
}

/// What a human is currently doing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Behavior {
    /// Not moving; optionally turned toward a point.
    Static { face: Option<Vec2> },
    /// Walks to its goal and draws a new one on arrival.
    Wander,
    /// Walks to its goal, then stands facing `face`.
    Approach { face: Vec2 },
    /// Moves with a crowd, keeping `offset` from the crowd's goal.
    Group { crowd: u32, offset: Vec2 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Human {
    pub entity: Entity,
    pub role: HumanRole,
    pub policy: HumanPolicy,
    pub goal: Vec2,
    pub considers_robot: bool,
    pub fov_deg: f64,
    pub behavior: Behavior,
}

impl Human {
    pub fn is_static(&self) -> bool {
        matches!(self.behavior, Behavior::Static { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionKind {
    HumanCrowd {
        members: Vec<EntityId>,
        center: Vec2,
        radius: f64,
    },
    HumanLaptop {
        human: EntityId,
        laptop: EntityId,
    },
}

impl InteractionKind {
    /// Ids of all entities taking part.
    pub fn participants(&self) -> Vec<EntityId> {
        match self {
            InteractionKind::HumanCrowd { members, .. } => members.clone(),
            InteractionKind::HumanLaptop { human, laptop } => alloc::vec![*human, *laptop],
        }
    }

    pub fn involves(&self, id: EntityId) -> bool {
        match self {
            InteractionKind::HumanCrowd { members, .. } => members.contains(&id),
            InteractionKind::HumanLaptop { human, laptop } => *human == id || *laptop == id,
        }
    }

    /// Same participants, ignoring geometry that drifts as a crowd moves.
    pub fn same_participants(&self, other: &InteractionKind) -> bool {
        match (self, other) {
            (
                InteractionKind::HumanCrowd { members: a, .. },
                InteractionKind::HumanCrowd { members: b, .. },
            ) => a.len() == b.len() && a.iter().all(|m| b.contains(m)),
            (
                InteractionKind::HumanLaptop {
                    human: h1,
                    laptop: l1,
                },
                InteractionKind::HumanLaptop {
                    human: h2,
                    laptop: l2,
                },
            ) => h1 == h2 && l1 == l2,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub id: u32,
    pub kind: InteractionKind,
    /// Moving crowds travel toward `goal` as a formation.
    pub moving: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<Vec2>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Form,
    Disperse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub at_step: u32,
    pub action: EventAction,
    pub target: InteractionKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub position: Vec2,
    /// Success radius around `position` (m).
    pub radius: f64,
}

/// Settings the world keeps from its configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSettings {
    pub dt: f64,
    pub max_steps: u32,
    pub human_radius: f64,
    pub goal_tolerance: f64,
    pub disperse_static_prob: f64,
    pub fov_limits_policy: bool,
}

/// Full simulation state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub room: RoomShape,
    /// Cached outline of `room`.
    pub polygon: Vec<Vec2>,
    pub robot: Robot,
    pub humans: Vec<Human>,
    pub objects: Vec<Entity>,
    pub walls: Vec<Wall>,
    pub interactions: Vec<Interaction>,
    pub pending_events: Vec<InteractionEvent>,
    pub goal: Goal,
    pub step_index: u32,
    pub settings: WorldSettings,
    pub next_interaction_id: u32,
    #[serde(skip, default = "unseeded")]
    pub rng: Rng,
}

fn unseeded() -> Rng {
    Rng::seed_from_u64(0)
}

impl World {
    /// Equality of everything except the random generator state.
    pub fn same_state(&self, other: &World) -> bool {
        self.room == other.room
            && self.polygon == other.polygon
            && self.robot == other.robot
            && self.humans == other.humans
            && self.objects == other.objects
            && self.walls == other.walls
            && self.interactions == other.interactions
            && self.pending_events == other.pending_events
            && self.goal == other.goal
            && self.step_index == other.step_index
            && self.settings == other.settings
            && self.next_interaction_id == other.next_interaction_id
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.polygon)
    }

    pub fn human(&self, id: EntityId) -> Option<&Human> {
        self.humans.iter().find(|h| h.entity.id == id)
    }

    pub fn object(&self, id: EntityId) -> Option<&Entity> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        if id == self.robot.entity.id {
            return Some(&self.robot.entity);
        }
        self.human(id)
            .map(|h| &h.entity)
            .or_else(|| self.object(id))
    }

    /// Number of entities other than the robot.
    pub fn census(&self) -> usize {
        self.humans.len() + self.objects.len()
    }

    pub fn is_interacting(&self, id: EntityId) -> bool {
        self.interactions.iter().any(|i| i.kind.involves(id))
    }

    /// Table a laptop sits on, if any.
    pub fn table_under(&self, laptop: &Entity) -> Option<&Entity> {
        self.objects.iter().find(|t| {
            t.kind == EntityKind::Table
                && t.position().distance(laptop.position()) + laptop.radius <= t.radius + 1e-9
        })
    }

    /// Objects that block movement; laptops resting on tables are skipped.
    pub fn obstacles(&self) -> impl Iterator<Item = &Entity> {
        self.objects
            .iter()
            .filter(move |o| o.kind != EntityKind::Laptop || self.table_under(o).is_none())
    }

    /// Where a human stands to use `laptop`, and the point it faces.
    pub fn laptop_spot(&self, laptop: &Entity, human_radius: f64) -> Vec2 {
        laptop_spot(laptop, self.table_under(laptop), human_radius, None)
    }

    /// Fires one interaction event.
    pub fn apply_event(&mut self, event: &InteractionEvent) -> Result<(), ScenarioError> {
        match event.action {
            EventAction::Form => self.form(&event.target),
            EventAction::Disperse => self.disperse(&event.target),
        }
    }

    fn check_human(&self, id: EntityId) -> Result<(), ScenarioError> {
        match self.entity(id) {
            None => Err(ScenarioError::DanglingId(id)),
            Some(e) if e.kind != EntityKind::Human => Err(ScenarioError::WrongKind(id, "human")),
            Some(_) => Ok(()),
        }
    }

    fn human_mut(&mut self, id: EntityId) -> &mut Human {
        self.humans
            .iter_mut()
            .find(|h| h.entity.id == id)
            .expect("checked id")
    }

    fn form(&mut self, target: &InteractionKind) -> Result<(), ScenarioError> {
        match target {
            InteractionKind::HumanCrowd {
                members,
                center,
                radius,
            } => {
                if members.len() < 2 {
                    return Err(ScenarioError::CrowdTooSmall(members.len()));
                }
                for &m in members {
                    self.check_human(m)?;
                    if self.is_interacting(m) {
                        return Err(ScenarioError::AlreadyInteracting(m));
                    }
                }
                let first = self.human(members[0]).expect("checked").entity.position();
                let phase = (first - *center).angle();
                let n = members.len() as f64;
                for (i, &m) in members.iter().enumerate() {
                    let slot = *center + Vec2::from_angle(phase + TAU * i as f64 / n) * *radius;
                    let h = self.human_mut(m);
                    h.goal = slot;
                    h.behavior = Behavior::Approach { face: *center };
                }
            }
            InteractionKind::HumanLaptop { human, laptop } => {
                self.check_human(*human)?;
                let lap = match self.object(*laptop) {
                    None => return Err(ScenarioError::DanglingId(*laptop)),
                    Some(o) if o.kind != EntityKind::Laptop => {
                        return Err(ScenarioError::WrongKind(*laptop, "laptop"))
                    }
                    Some(o) => o.clone(),
                };
                for id in [*human, *laptop] {
                    if self.is_interacting(id) {
                        return Err(ScenarioError::AlreadyInteracting(id));
                    }
                }
                let spot = self.laptop_spot(&lap, self.settings.human_radius);
                let h = self.human_mut(*human);
                h.goal = spot;
                h.behavior = Behavior::Approach {
                    face: lap.position(),
                };
            }
        }
        let id = self.next_interaction_id;
        self.next_interaction_id += 1;
        self.interactions.push(Interaction {
            id,
            kind: target.clone(),
            moving: false,
            goal: None,
        });
        Ok(())
    }

    fn disperse(&mut self, target: &InteractionKind) -> Result<(), ScenarioError> {
        for id in target.participants() {
            if self.entity(id).is_none() {
                return Err(ScenarioError::DanglingId(id));
            }
        }
        let idx = self
            .interactions
            .iter()
            .position(|i| i.kind.same_participants(target))
            .ok_or(ScenarioError::NoSuchInteraction)?;
        let removed = self.interactions.remove(idx);
        let humans: Vec<EntityId> = match &removed.kind {
            InteractionKind::HumanCrowd { members, .. } => members.clone(),
            InteractionKind::HumanLaptop { human, .. } => alloc::vec![*human],
        };
        let allow_static = matches!(removed.kind, InteractionKind::HumanCrowd { .. });

        let mut taken: Vec<Vec2> = Vec::with_capacity(humans.len());
        for id in humans {
            let stays = allow_static && self.rng.chance(self.settings.disperse_static_prob);
            let (pos, current, radius) = {
                let h = self.human(id).expect("checked");
                (h.entity.position(), h.goal, h.entity.radius)
            };
            if stays {
                let h = self.human_mut(id);
                h.goal = pos;
                h.behavior = Behavior::Static { face: None };
                taken.push(pos);
                continue;
            }
            let goal = {
                let World {
                    polygon,
                    walls,
                    objects,
                    rng,
                    ..
                } = self;
                let geom = FreeSpace {
                    polygon,
                    walls,
                    objects,
                };
                geom.sample(
                    rng,
                    radius,
                    |g| g != current && !taken.contains(&g),
                    "dispersal goal",
                )?
            };
            taken.push(goal);
            let h = self.human_mut(id);
            h.goal = goal;
            h.behavior = Behavior::Wander;
        }
        Ok(())
    }

    /// Draws a new goal for a human who reached its current one, using the
    /// world's own generator.
    pub(crate) fn resample_goal_for(&mut self, index: usize) -> Result<Vec2, ScenarioError> {
        let (current, radius) = (self.humans[index].goal, self.humans[index].entity.radius);
        let World {
            polygon,
            walls,
            objects,
            rng,
            ..
        } = self;
        FreeSpace {
            polygon,
            walls,
            objects,
        }
        .sample(rng, radius, |g| g != current, "human goal")
    }

    /// New crowd goal such that every member slot is free.
    pub(crate) fn resample_crowd_goal(
        &mut self,
        offsets: &[Vec2],
        current: Vec2,
    ) -> Result<Vec2, ScenarioError> {
        let radius = self.settings.human_radius;
        let World {
            polygon,
            walls,
            objects,
            rng,
            ..
        } = self;
        let geom = FreeSpace {
            polygon,
            walls,
            objects,
        };
        geom.sample(
            rng,
            radius,
            |g| g != current && offsets.iter().all(|&o| geom.is_free(g + o, radius)),
            "crowd goal",
        )
    }
}

/// New goal for `human`: uniform inside the room, clear of walls and
/// obstacles, and different from its current goal.
pub fn resample_goal(human: &Human, world: &World, rng: &mut Rng) -> Result<Vec2, ScenarioError> {
    let geom = FreeSpace {
        polygon: &world.polygon,
        walls: &world.walls,
        objects: &world.objects,
    };
    let current = human.goal;
    geom.sample(rng, human.entity.radius, |g| g != current, "human goal")
}

/// Static free space: room outline, walls and objects.
struct FreeSpace<'a> {
    polygon: &'a [Vec2],
    walls: &'a [Wall],
    objects: &'a [Entity],
}

impl FreeSpace<'_> {
    fn is_free(&self, p: Vec2, radius: f64) -> bool {
        point_in_polygon(p, self.polygon)
            && self
                .walls
                .iter()
                .all(|w| segment_circle_dist(w, p, radius) > SPAWN_GAP)
            && self
                .objects
                .iter()
                .all(|o| circle_circle_dist(p, radius, o.position(), o.radius) > SPAWN_GAP)
    }

    fn sample(
        &self,
        rng: &mut Rng,
        radius: f64,
        accept: impl Fn(Vec2) -> bool,
        what: &str,
    ) -> Result<Vec2, ScenarioError> {
        let (lo, hi) = bounds(self.polygon);
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let p = Vec2::new(rng.range(lo.x, hi.x), rng.range(lo.y, hi.y));
            if self.is_free(p, radius) && accept(p) {
                return Ok(p);
            }
        }
        Err(ScenarioError::PlacementFailed {
            what: String::from(what),
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })
    }
}

fn bounds(poly: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = poly[0];
    let mut hi = poly[0];
    for p in poly {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

fn laptop_spot(
    laptop: &Entity,
    table: Option<&Entity>,
    human_radius: f64,
    fallback_dir: Option<Vec2>,
) -> Vec2 {
    let dir_default = fallback_dir.unwrap_or(Vec2::from_angle(laptop.pose.theta));
    match table {
        Some(t) => {
            let mut dir = (laptop.position() - t.position()).normalize_or_zero();
            if dir == Vec2::ZERO {
                dir = dir_default;
            }
            t.position() + dir * (t.radius + human_radius + LAPTOP_STANDOFF)
        }
        None => laptop.position() + dir_default * (laptop.radius + human_radius + LAPTOP_STANDOFF),
    }
}

/// Rejection sampler that also tracks every disc placed so far.
struct Placer<'a> {
    polygon: &'a [Vec2],
    walls: &'a [Wall],
    lo: Vec2,
    hi: Vec2,
    discs: Vec<(Vec2, f64)>,
}

impl<'a> Placer<'a> {
    fn new(polygon: &'a [Vec2], walls: &'a [Wall]) -> Self {
        let (lo, hi) = bounds(polygon);
        Placer {
            polygon,
            walls,
            lo,
            hi,
            discs: Vec::new(),
        }
    }

    fn is_free(&self, p: Vec2, r: f64) -> bool {
        point_in_polygon(p, self.polygon)
            && self
                .walls
                .iter()
                .all(|w| segment_circle_dist(w, p, r) > SPAWN_GAP)
            && self
                .discs
                .iter()
                .all(|&(q, rq)| circle_circle_dist(p, r, q, rq) > SPAWN_GAP)
    }

    fn random_point(&self, rng: &mut Rng) -> Vec2 {
        Vec2::new(
            rng.range(self.lo.x, self.hi.x),
            rng.range(self.lo.y, self.hi.y),
        )
    }

    fn place(&mut self, rng: &mut Rng, r: f64, what: &str) -> Result<Vec2, ScenarioError> {
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let p = self.random_point(rng);
            if self.is_free(p, r) {
                self.discs.push((p, r));
                return Ok(p);
            }
        }
        Err(failed(what))
    }

    /// Places a ring of `n` discs around a free centre.
    fn place_ring(
        &mut self,
        rng: &mut Rng,
        n: usize,
        ring: f64,
        r: f64,
        what: &str,
    ) -> Result<(Vec2, Vec<Vec2>), ScenarioError> {
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let center = self.random_point(rng);
            let phase = rng.range(-PI, PI);
            let members: Vec<Vec2> = (0..n)
                .map(|i| center + Vec2::from_angle(phase + TAU * i as f64 / n as f64) * ring)
                .collect();
            let apart = members.iter().enumerate().all(|(i, &a)| {
                members[..i]
                    .iter()
                    .all(|&b| circle_circle_dist(a, r, b, r) > SPAWN_GAP)
            });
            if apart && members.iter().all(|&m| self.is_free(m, r)) {
                self.discs.extend(members.iter().map(|&m| (m, r)));
                return Ok((center, members));
            }
        }
        Err(failed(what))
    }
}

fn failed(what: &str) -> ScenarioError {
    ScenarioError::PlacementFailed {
        what: String::from(what),
        attempts: MAX_PLACEMENT_ATTEMPTS,
    }
}

fn draw_count(rng: &mut Rng, c: CountRange) -> u32 {
    rng.int_inclusive(c.min, c.max)
}

/// Distinct sorted step indices in `1..max_steps`.
fn event_steps(rng: &mut Rng, k: u32, max_steps: u32) -> Vec<u32> {
    let available = max_steps.saturating_sub(1);
    let k = k.min(available);
    let mut steps: Vec<u32> = Vec::with_capacity(k as usize);
    while (steps.len() as u32) < k {
        let s = 1 + rng.index(available as usize) as u32;
        if !steps.contains(&s) {
            steps.push(s);
        }
    }
    steps.sort_unstable();
    steps
}

/// Builds a fresh world from `config`, seeded with `config.episode.seed`.
pub fn generate(config: &ScenarioConfig) -> Result<World, ScenarioError> {
    config.validate().map_err(ScenarioError::InvalidConfig)?;
    let mut rng = Rng::seed_from_u64(config.episode.seed);
    let room = config.room.shape().map_err(ScenarioError::InvalidConfig)?;
    let polygon = room.polygon();
    let walls = room.walls(config.room.wall_thickness);
    let hc = &config.humans;
    let oc = &config.objects;
    let ic = &config.interactions;

    let mut placer = Placer::new(&polygon, &walls);
    let mut next_id = 1u32;
    let mut new_id = || {
        let id = EntityId(next_id);
        next_id += 1;
        id
    };

    // Objects.
    let mut objects: Vec<Entity> = Vec::new();
    let n_tables = draw_count(&mut rng, oc.tables);
    let mut tables: Vec<Entity> = Vec::new();
    for _ in 0..n_tables {
        let r = rng.range(oc.table_radius.min, oc.table_radius.max);
        let p = placer.place(&mut rng, r, "table")?;
        let theta = rng.range(-PI, PI);
        tables.push(Entity::new(
            new_id(),
            EntityKind::Table,
            Pose2D::new(p.x, p.y, theta),
            r,
        ));
    }
    objects.extend(tables.iter().cloned());

    let n_laptops = draw_count(&mut rng, oc.laptops);
    let n_laptop_users = draw_count(&mut rng, ic.human_laptop).min(n_laptops) as usize;
    let mut laptops: Vec<Entity> = Vec::new();
    let mut spots: Vec<Vec2> = Vec::new();
    for k in 0..n_laptops as usize {
        let needs_spot = k < n_laptop_users;
        let entity = if oc.laptops_on_tables && !tables.is_empty() {
            let table = &tables[k % tables.len()];
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let reach = table.radius - oc.laptop_radius;
                let r = reach * libm::sqrt(rng.uniform());
                let a = rng.range(-PI, PI);
                let p = table.position() + Vec2::from_angle(a) * r;
                let theta = rng.range(-PI, PI);
                let lap = Entity::new(
                    EntityId(0),
                    EntityKind::Laptop,
                    Pose2D::new(p.x, p.y, theta),
                    oc.laptop_radius,
                );
                if needs_spot {
                    let spot = laptop_spot(&lap, Some(table), hc.radius, None);
                    if !placer.is_free(spot, hc.radius) {
                        continue;
                    }
                    placer.discs.push((spot, hc.radius));
                    spots.push(spot);
                }
                placed = Some(lap);
                break;
            }
            placed.ok_or_else(|| failed("laptop"))?
        } else {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let p = placer.random_point(&mut rng);
                let theta = rng.range(-PI, PI);
                if !placer.is_free(p, oc.laptop_radius) {
                    continue;
                }
                let lap = Entity::new(
                    EntityId(0),
                    EntityKind::Laptop,
                    Pose2D::new(p.x, p.y, theta),
                    oc.laptop_radius,
                );
                if needs_spot {
                    let spot = laptop_spot(&lap, None, hc.radius, None);
                    placer.discs.push((p, oc.laptop_radius));
                    if !placer.is_free(spot, hc.radius) {
                        placer.discs.pop();
                        continue;
                    }
                    placer.discs.push((spot, hc.radius));
                    spots.push(spot);
                } else {
                    placer.discs.push((p, oc.laptop_radius));
                }
                placed = Some(lap);
                break;
            }
            placed.ok_or_else(|| failed("laptop"))?
        };
        laptops.push(Entity {
            id: new_id(),
            ..entity
        });
    }
    objects.extend(laptops.iter().cloned());

    for _ in 0..draw_count(&mut rng, oc.plants) {
        let p = placer.place(&mut rng, oc.plant_radius, "plant")?;
        let theta = rng.range(-PI, PI);
        objects.push(Entity::new(
            new_id(),
            EntityKind::Plant,
            Pose2D::new(p.x, p.y, theta),
            oc.plant_radius,
        ));
    }

    // Robot and goal.
    let rr = config.robot.radius;
    let rp = placer.place(&mut rng, rr, "robot")?;
    let robot_theta = rng.range(-PI, PI);
    let robot = Robot {
        entity: Entity::new(
            EntityId::ROBOT,
            EntityKind::Robot,
            Pose2D::new(rp.x, rp.y, robot_theta),
            rr,
        ),
        steering: config.robot.steering,
    };
    let goal_radius = config.reward.goal_radius;
    let min_goal = goal_radius + config.episode.min_goal_distance;
    let goal_pos = {
        let geom = FreeSpace {
            polygon: &polygon,
            walls: &walls,
            objects: &objects,
        };
        geom.sample(&mut rng, rr, |g| g.distance(rp) > min_goal, "goal")?
    };
    placer.discs.push((goal_pos, rr));

    // Humans.
    let settings = WorldSettings {
        dt: config.episode.dt,
        max_steps: config.episode.max_steps,
        human_radius: hc.radius,
        goal_tolerance: hc.goal_tolerance,
        disperse_static_prob: ic.disperse_static_prob,
        fov_limits_policy: hc.fov_limits_policy,
    };
    let mut humans: Vec<Human> = Vec::new();
    let mut interactions: Vec<Interaction> = Vec::new();
    let mut next_interaction_id = 0u32;
    let spawn = |rng: &mut Rng,
                 id: EntityId,
                 p: Vec2,
                 theta: f64,
                 role: HumanRole,
                 behavior: Behavior|
     -> Human {
        let policy = match hc.policy {
            PolicyChoice::Orca => HumanPolicy::Orca(hc.orca.sample(rng, hc.param_rel_std)),
            PolicyChoice::Sfm => HumanPolicy::Sfm(hc.sfm.sample(rng, hc.param_rel_std)),
            PolicyChoice::Random => {
                if rng.chance(0.5) {
                    HumanPolicy::Orca(hc.orca.sample(rng, hc.param_rel_std))
                } else {
                    HumanPolicy::Sfm(hc.sfm.sample(rng, hc.param_rel_std))
                }
            }
        };
        Human {
            entity: Entity::new(
                id,
                EntityKind::Human,
                Pose2D::new(p.x, p.y, theta),
                hc.radius,
            ),
            role,
            policy,
            goal: p,
            considers_robot: hc.consider_robot,
            fov_deg: hc.fov_deg,
            behavior,
        }
    };

    for _ in 0..draw_count(&mut rng, ic.static_crowds) {
        let n = draw_count(&mut rng, ic.crowd_size) as usize;
        let ring = rng.range(ic.crowd_radius.min, ic.crowd_radius.max);
        let (center, spots) = placer.place_ring(&mut rng, n, ring, hc.radius, "static crowd")?;
        let mut members = Vec::with_capacity(n);
        for p in spots {
            let id = new_id();
            let theta = (center - p).angle();
            humans.push(spawn(
                &mut rng,
                id,
                p,
                theta,
                HumanRole::StaticCrowd,
                Behavior::Static { face: Some(center) },
            ));
            members.push(id);
        }
        interactions.push(Interaction {
            id: next_interaction_id,
            kind: InteractionKind::HumanCrowd {
                members,
                center,
                radius: ring,
            },
            moving: false,
            goal: None,
        });
        next_interaction_id += 1;
    }

    let mut dynamic_crowds: Vec<(u32, Vec<EntityId>, f64)> = Vec::new();
    for _ in 0..draw_count(&mut rng, ic.dynamic_crowds) {
        let n = draw_count(&mut rng, ic.crowd_size) as usize;
        let ring = rng.range(ic.crowd_radius.min, ic.crowd_radius.max);
        let (center, spots) = placer.place_ring(&mut rng, n, ring, hc.radius, "dynamic crowd")?;
        let offsets: Vec<Vec2> = spots.iter().map(|&p| p - center).collect();
        let crowd_goal = {
            let geom = FreeSpace {
                polygon: &polygon,
                walls: &walls,
                objects: &objects,
            };
            geom.sample(
                &mut rng,
                hc.radius,
                |g| g != center && offsets.iter().all(|&o| geom.is_free(g + o, hc.radius)),
                "crowd goal",
            )?
        };
        let crowd_id = next_interaction_id;
        next_interaction_id += 1;
        let heading = (crowd_goal - center).angle();
        let mut members = Vec::with_capacity(n);
        for (p, offset) in spots.into_iter().zip(offsets) {
            let id = new_id();
            let mut h = spawn(
                &mut rng,
                id,
                p,
                heading,
                HumanRole::DynamicCrowd,
                Behavior::Group {
                    crowd: crowd_id,
                    offset,
                },
            );
            h.goal = crowd_goal + offset;
            humans.push(h);
            members.push(id);
        }
        dynamic_crowds.push((crowd_id, members.clone(), ring));
        interactions.push(Interaction {
            id: crowd_id,
            kind: InteractionKind::HumanCrowd {
                members,
                center,
                radius: ring,
            },
            moving: true,
            goal: Some(crowd_goal),
        });
    }

    let mut laptop_pairs: Vec<(EntityId, EntityId, bool)> = Vec::new();
    for k in 0..n_laptop_users {
        let laptop = &laptops[k];
        let id = new_id();
        let interacting = !ic.laptop_events || rng.chance(0.5);
        let human = if interacting {
            let spot = spots[k];
            let theta = (laptop.position() - spot).angle();
            spawn(
                &mut rng,
                id,
                spot,
                theta,
                HumanRole::LaptopUser,
                Behavior::Static {
                    face: Some(laptop.position()),
                },
            )
        } else {
            let p = placer.place(&mut rng, hc.radius, "laptop user")?;
            let theta = rng.range(-PI, PI);
            let mut h = spawn(
                &mut rng,
                id,
                p,
                theta,
                HumanRole::LaptopUser,
                Behavior::Wander,
            );
            let geom = FreeSpace {
                polygon: &polygon,
                walls: &walls,
                objects: &objects,
            };
            h.goal = geom.sample(&mut rng, hc.radius, |g| g != p, "human goal")?;
            h
        };
        humans.push(human);
        if interacting {
            interactions.push(Interaction {
                id: next_interaction_id,
                kind: InteractionKind::HumanLaptop {
                    human: id,
                    laptop: laptop.id,
                },
                moving: false,
                goal: None,
            });
            next_interaction_id += 1;
        }
        laptop_pairs.push((id, laptop.id, interacting));
    }

    for _ in 0..draw_count(&mut rng, hc.count) {
        let p = placer.place(&mut rng, hc.radius, "human")?;
        let theta = rng.range(-PI, PI);
        let id = new_id();
        let mut h = spawn(
            &mut rng,
            id,
            p,
            theta,
            HumanRole::Individual,
            Behavior::Wander,
        );
        let geom = FreeSpace {
            polygon: &polygon,
            walls: &walls,
            objects: &objects,
        };
        h.goal = geom.sample(&mut rng, hc.radius, |g| g != p, "human goal")?;
        humans.push(h);
    }

    for _ in 0..draw_count(&mut rng, hc.static_count) {
        let p = placer.place(&mut rng, hc.radius, "standing human")?;
        let theta = rng.range(-PI, PI);
        humans.push(spawn(
            &mut rng,
            new_id(),
            p,
            theta,
            HumanRole::Standing,
            Behavior::Static { face: None },
        ));
    }

    // Interaction schedule.
    let max_steps = config.episode.max_steps;
    let mut events: Vec<InteractionEvent> = Vec::new();
    if ic.laptop_events {
        for &(human, laptop, interacting) in &laptop_pairs {
            let target = InteractionKind::HumanLaptop { human, laptop };
            let mut forming = !interacting;
            for at_step in event_steps(&mut rng, ic.events_per_interaction, max_steps) {
                let action = if forming {
                    EventAction::Form
                } else {
                    EventAction::Disperse
                };
                events.push(InteractionEvent {
                    at_step,
                    action,
                    target: target.clone(),
                });
                forming = !forming;
            }
        }
    }
    if ic.crowd_events {
        for (_, members, ring) in &dynamic_crowds {
            let mut forming = false;
            for at_step in event_steps(&mut rng, ic.events_per_interaction, max_steps) {
                let target = if forming {
                    let n = members.len();
                    let geom = FreeSpace {
                        polygon: &polygon,
                        walls: &walls,
                        objects: &objects,
                    };
                    let center = geom.sample(
                        &mut rng,
                        hc.radius,
                        |c| {
                            (0..n).all(|i| {
                                geom.is_free(
                                    c + Vec2::from_angle(TAU * i as f64 / n as f64) * *ring,
                                    hc.radius,
                                )
                            }) && geom.is_free(c, hc.radius + *ring)
                        },
                        "crowd formation",
                    )?;
                    InteractionKind::HumanCrowd {
                        members: members.clone(),
                        center,
                        radius: *ring,
                    }
                } else {
                    InteractionKind::HumanCrowd {
                        members: members.clone(),
                        center: Vec2::ZERO,
                        radius: *ring,
                    }
                };
                let action = if forming {
                    EventAction::Form
                } else {
                    EventAction::Disperse
                };
                events.push(InteractionEvent {
                    at_step,
                    action,
                    target,
                });
                forming = !forming;
            }
        }
    }
    events.sort_by_key(|e| e.at_step);

    Ok(World {
        room,
        polygon: polygon.clone(),
        robot,
        humans,
        objects,
        walls: walls.clone(),
        interactions,
        pending_events: events,
        goal: Goal {
            position: goal_pos,
            radius: goal_radius,
        },
        step_index: 0,
        settings,
        next_interaction_id,
        rng,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;

    fn min_pairwise_gap(w: &World) -> f64 {
        let mut discs: Vec<(&Entity, bool)> = alloc::vec![(&w.robot.entity, false)];
        discs.extend(w.humans.iter().map(|h| (&h.entity, false)));
        discs.extend(w.objects.iter().map(|o| {
            (
                o,
                o.kind == EntityKind::Laptop && w.table_under(o).is_some(),
            )
        }));
        let mut best = f64::INFINITY;
        for i in 0..discs.len() {
            for j in 0..i {
                let (a, a_on_table) = discs[i];
                let (b, b_on_table) = discs[j];
                let stacked = (a_on_table && b.kind == EntityKind::Table)
                    || (b_on_table && a.kind == EntityKind::Table);
                if stacked {
                    continue;
                }
                best = best.min(circle_circle_dist(
                    a.position(),
                    a.radius,
                    b.position(),
                    b.radius,
                ));
            }
        }
        best
    }

    #[test]
    fn preset_one_census() {
        let w = generate(&preset(1).unwrap().with_seed(42)).unwrap();
        assert_eq!(w.humans.len(), 1);
        assert_eq!(w.objects.len(), 1);
        assert_eq!(w.objects[0].kind, EntityKind::Plant);
        assert_eq!(w.humans[0].role, HumanRole::Individual);
        assert_eq!(w.room, RoomShape::Square { side: 10.0 });
    }

    #[test]
    fn empty_scenario() {
        let w = generate(&ScenarioConfig::default()).unwrap();
        assert!(w.humans.is_empty() && w.objects.is_empty());
        assert_eq!(w.walls.len(), 4);
        assert!(w.contains_point(w.goal.position));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = preset(3).unwrap().with_seed(7);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&cfg.clone().with_seed(8)).unwrap();
        assert_eq!(a.humans.len(), c.humans.len());
        assert_ne!(a.robot.entity.pose, c.robot.entity.pose);
    }

    #[test]
    fn no_initial_overlaps() {
        for seed in 0..200 {
            for k in 1..=3 {
                let w = generate(&preset(k).unwrap().with_seed(seed)).unwrap();
                assert!(min_pairwise_gap(&w) > 0.0, "seed {seed} preset {k}");
                for h in &w.humans {
                    assert!(w.contains_point(h.entity.position()));
                    assert!(w.contains_point(h.goal));
                }
                for o in &w.obstacles().collect::<Vec<_>>() {
                    assert!(w.goal.position.distance(o.position()) > o.radius);
                }
            }
        }
    }

    #[test]
    fn overconstrained_room_fails() {
        let mut cfg = ScenarioConfig::default();
        cfg.room = crate::config::RoomConfig::square(1.0);
        cfg.objects.plants = CountRange::exactly(5);
        assert!(matches!(
            generate(&cfg),
            Err(ScenarioError::PlacementFailed { .. })
        ));
    }

    #[test]
    fn disperse_crowd_gives_distinct_goals() {
        let mut w = generate(&preset(2).unwrap().with_seed(3)).unwrap();
        let crowd = w
            .interactions
            .iter()
            .find(|i| matches!(i.kind, InteractionKind::HumanCrowd { .. }) && !i.moving)
            .unwrap()
            .kind
            .clone();
        let before = w.interactions.len();
        w.apply_event(&InteractionEvent {
            at_step: 1,
            action: EventAction::Disperse,
            target: crowd.clone(),
        })
        .unwrap();
        assert_eq!(w.interactions.len(), before - 1);
        let goals: Vec<Vec2> = crowd
            .participants()
            .iter()
            .map(|&id| w.human(id).unwrap().goal)
            .collect();
        for i in 0..goals.len() {
            for j in 0..i {
                assert_ne!(goals[i], goals[j]);
            }
        }
    }

    #[test]
    fn form_laptop_interaction_sets_facing_goal() {
        let mut cfg = preset(2).unwrap();
        cfg.interactions.human_laptop = CountRange::ZERO;
        cfg.humans.count = CountRange::exactly(1);
        let mut w = generate(&cfg.with_seed(5)).unwrap();
        let laptop = w
            .objects
            .iter()
            .find(|o| o.kind == EntityKind::Laptop)
            .unwrap()
            .clone();
        let human = w
            .humans
            .iter()
            .find(|h| h.role == HumanRole::Individual)
            .unwrap()
            .entity
            .id;
        let target = InteractionKind::HumanLaptop {
            human,
            laptop: laptop.id,
        };
        w.apply_event(&InteractionEvent {
            at_step: 1,
            action: EventAction::Form,
            target: target.clone(),
        })
        .unwrap();
        let h = w.human(human).unwrap();
        assert_eq!(
            h.behavior,
            Behavior::Approach {
                face: laptop.position()
            }
        );
        let table = w.table_under(&laptop).unwrap();
        let reach = table.radius * 2.0 + h.entity.radius + LAPTOP_STANDOFF + 1e-9;
        assert!(h.goal.distance(laptop.position()) <= reach);
        // Forming twice is rejected.
        let again = w.apply_event(&InteractionEvent {
            at_step: 2,
            action: EventAction::Form,
            target,
        });
        assert!(matches!(again, Err(ScenarioError::AlreadyInteracting(_))));
    }

    #[test]
    fn disperse_without_interaction_fails() {
        let mut w = generate(&preset(1).unwrap()).unwrap();
        let human = w.humans[0].entity.id;
        let other = w.objects[0].id;
        let target = InteractionKind::HumanCrowd {
            members: alloc::vec![human, human],
            center: Vec2::ZERO,
            radius: 1.0,
        };
        let ev = InteractionEvent {
            at_step: 0,
            action: EventAction::Disperse,
            target,
        };
        assert_eq!(w.apply_event(&ev), Err(ScenarioError::NoSuchInteraction));
        let dangling = InteractionKind::HumanLaptop {
            human: EntityId(99),
            laptop: other,
        };
        let ev = InteractionEvent {
            at_step: 0,
            action: EventAction::Disperse,
            target: dangling,
        };
        assert_eq!(
            w.apply_event(&ev),
            Err(ScenarioError::DanglingId(EntityId(99)))
        );
    }

    #[test]
    fn resample_goal_contract() {
        let w = generate(&preset(1).unwrap().with_seed(1)).unwrap();
        let h = &w.humans[0];
        let mut a = Rng::seed_from_u64(4);
        let mut b = Rng::seed_from_u64(4);
        let g = resample_goal(h, &w, &mut a).unwrap();
        assert_eq!(g, resample_goal(h, &w, &mut b).unwrap());
        assert_ne!(g, h.goal);
        assert!(g.x.abs() < 5.0 - h.entity.radius && g.y.abs() < 5.0 - h.entity.radius);
    }

    #[test]
    fn resample_goal_fails_when_room_is_full() {
        let mut w = generate(&preset(1).unwrap().with_seed(1)).unwrap();
        w.objects[0].pose = Pose2D::new(0.0, 0.0, 0.0);
        w.objects[0].radius = 20.0;
        let h = w.humans[0].clone();
        let mut rng = Rng::seed_from_u64(0);
        assert!(matches!(
            resample_goal(&h, &w, &mut rng),
            Err(ScenarioError::PlacementFailed { .. })
        ));
    }

    #[test]
    fn schedules_events_for_presets() {
        let w2 = generate(&preset(2).unwrap().with_seed(11)).unwrap();
        assert!(w2
            .pending_events
            .iter()
            .all(|e| matches!(e.target, InteractionKind::HumanLaptop { .. })));
        assert_eq!(w2.pending_events.len(), 1);
        let w3 = generate(&preset(3).unwrap().with_seed(11)).unwrap();
        assert!(w3
            .pending_events
            .iter()
            .any(|e| matches!(e.target, InteractionKind::HumanCrowd { .. })));
        assert!(w3
            .pending_events
            .windows(2)
            .all(|p| p[0].at_step <= p[1].at_step));
    }
}
