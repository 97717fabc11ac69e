//! Per-step metrics, episode summaries, run aggregates and discomfort
//! heatmaps.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::CollisionReport;
use crate::error::ScorerError;
use crate::geometry::{circle_circle_dist, segment_circle_dist, Vec2};
use crate::observe::Relationships;
use crate::reward::{dsrnn_discomfort, RewardParams, RewardPiece, SocialScorer, SurrogateParams};
use crate::scenario::World;

/// Personal-space radius around each human (m, surface distance).
pub const PERSONAL_SPACE: f64 = 0.45;
/// Below this speed the robot counts as stalled (m/s).
pub const STALL_SPEED: f64 = 1e-3;
/// Smallest decrease in goal distance that counts as progress (m).
pub const PROGRESS_EPS: f64 = 1e-6;

/// Metrics reported after every step. Distances are `None` when there is
/// nothing to measure against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: u32,
    pub out_of_map: bool,
    pub collision_human: bool,
    pub collision_object: bool,
    pub collision_wall: bool,
    pub collision: bool,
    pub success: bool,
    pub timeout: bool,
    pub failure_to_progress: u32,
    pub stalled_time: u32,
    pub time_to_reach_goal: u32,
    pub stl: f64,
    pub spl: f64,
    pub path_length: f64,
    /// Robot speed over this step (m/s).
    pub speed: f64,
    pub v_min: f64,
    pub v_avg: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_avg: f64,
    pub a_max: f64,
    pub jerk_min: f64,
    pub jerk_avg: f64,
    pub jerk_max: f64,
    /// Smallest time to collision seen so far, in timesteps.
    pub time_to_collision: f64,
    pub minimum_distance_to_human: Option<f64>,
    pub minimum_obstacle_distance: Option<f64>,
    pub average_obstacle_distance: Option<f64>,
    pub closest_human_dist: Option<f64>,
    pub closest_obstacle_dist: Option<f64>,
    pub personal_space_compliance: f64,
    pub discomfort_dsrnn: f64,
    pub distance_reward: f64,
    /// Social score minus one, when a scorer was evaluated.
    pub sngnn_reward: Option<f64>,
    pub alive_reward: f64,
    pub reward: f64,
    pub reward_piece: RewardPiece,
    pub interactions: Relationships,
}

/// Running min / mean / max.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub sum: f64,
    pub count: u32,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }
}

impl Stats {
    pub fn push(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.sum += x;
        self.count += 1;
    }

    /// (min, mean, max), zeros when empty.
    pub fn triple(&self) -> (f64, f64, f64) {
        if self.count == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (self.min, self.sum / self.count as f64, self.max)
        }
    }

    pub fn of(values: impl IntoIterator<Item = f64>) -> Stats {
        let mut s = Stats::default();
        for v in values {
            s.push(v);
        }
        s
    }
}

/// Speed, |acceleration| and |jerk| series from per-step speeds.
pub fn kinematics(speeds: &[f64], dt: f64) -> (Stats, Stats, Stats) {
    let accel: Vec<f64> = speeds.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let jerk: Vec<f64> = accel.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    (
        Stats::of(speeds.iter().copied()),
        Stats::of(accel.iter().map(|a| a.abs())),
        Stats::of(jerk.iter().map(|j| j.abs())),
    )
}

/// Time until the robot first touches a human under constant velocities,
/// in timesteps, capped at `cap`.
pub fn time_to_collision(world: &World, cap: f64) -> f64 {
    let robot = &world.robot.entity;
    let mut best = cap;
    for h in &world.humans {
        let dp = h.entity.position() - robot.position();
        let dv = h.entity.velocity.linear() - robot.velocity.linear();
        let reach = robot.radius + h.entity.radius;
        let c = dp.length_squared() - reach * reach;
        if c <= 0.0 {
            return 0.0;
        }
        let a = dv.length_squared();
        let b = 2.0 * dp.dot(dv);
        if a == 0.0 {
            continue;
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            continue;
        }
        let t = (-b - libm::sqrt(disc)) / (2.0 * a);
        if t >= 0.0 {
            best = best.min(t / world.settings.dt);
        }
    }
    best
}

pub fn closest_human_distance(world: &World) -> Option<f64> {
    let r = &world.robot.entity;
    world
        .humans
        .iter()
        .map(|h| circle_circle_dist(r.position(), r.radius, h.entity.position(), h.entity.radius))
        .reduce(f64::min)
}

/// Closest surface distance to any object or wall.
pub fn closest_obstacle_distance(world: &World) -> Option<f64> {
    let r = &world.robot.entity;
    let p = r.position();
    world
        .objects
        .iter()
        .map(|o| circle_circle_dist(p, r.radius, o.position(), o.radius))
        .chain(
            world
                .walls
                .iter()
                .map(|w| segment_circle_dist(w, p, r.radius)),
        )
        .reduce(f64::min)
}

/// Episode-level accumulators behind the running fields of [`StepInfo`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub dt: f64,
    pub cap_steps: f64,
    pub robot_v_max: f64,
    /// Straight-line start-to-goal distance.
    pub shortest_path: f64,
    pub steps: u32,
    pub path_length: f64,
    pub psc_ok: u32,
    pub failure_to_progress: u32,
    pub stalled: u32,
    pub speeds: Vec<f64>,
    pub min_human: Option<f64>,
    pub min_obstacle: Option<f64>,
    pub obstacle_sum: f64,
    pub obstacle_count: u32,
    pub min_ttc: f64,
}

impl MetricsAccumulator {
    pub fn new(world: &World, robot_v_max: f64) -> Self {
        MetricsAccumulator {
            dt: world.settings.dt,
            cap_steps: world.settings.max_steps as f64,
            robot_v_max,
            shortest_path: world.robot.entity.position().distance(world.goal.position),
            steps: 0,
            path_length: 0.0,
            psc_ok: 0,
            failure_to_progress: 0,
            stalled: 0,
            speeds: Vec::new(),
            min_human: None,
            min_obstacle: None,
            obstacle_sum: 0.0,
            obstacle_count: 0,
            min_ttc: world.settings.max_steps as f64,
        }
    }

    /// Folds one tick into the accumulators and returns its info. Reward
    /// fields are left at zero for the caller to fill in.
    pub fn update(
        &mut self,
        prev_robot: Vec2,
        cur: &World,
        hits: &CollisionReport,
        success: bool,
        timeout: bool,
    ) -> StepInfo {
        self.steps += 1;
        let p0 = prev_robot;
        let p1 = cur.robot.entity.position();
        let moved = p0.distance(p1);
        self.path_length += moved;
        let speed = moved / self.dt;
        self.speeds.push(speed);
        if speed < STALL_SPEED {
            self.stalled += 1;
        }
        let d_prev = p0.distance(cur.goal.position);
        let d_cur = p1.distance(cur.goal.position);
        if d_prev - d_cur <= PROGRESS_EPS {
            self.failure_to_progress += 1;
        }

        let human = closest_human_distance(cur);
        if human.is_none_or(|d| d >= PERSONAL_SPACE) {
            self.psc_ok += 1;
        }
        self.min_human = min_opt(self.min_human, human);
        let obstacle = closest_obstacle_distance(cur);
        self.min_obstacle = min_opt(self.min_obstacle, obstacle);
        if let Some(d) = obstacle {
            self.obstacle_sum += d;
            self.obstacle_count += 1;
        }
        self.min_ttc = self.min_ttc.min(time_to_collision(cur, self.cap_steps));

        let (v, a, j) = kinematics(&self.speeds, self.dt);
        let (v_min, v_avg, v_max) = v.triple();
        let (a_min, a_avg, a_max) = a.triple();
        let (jerk_min, jerk_avg, jerk_max) = j.triple();
        let (spl, stl) = success_weighted(
            success,
            self.shortest_path,
            self.path_length,
            self.steps,
            self.robot_v_max,
            self.dt,
        );

        StepInfo {
            step: self.steps,
            out_of_map: hits.out_of_map,
            collision_human: hits.human,
            collision_object: hits.object,
            collision_wall: hits.wall,
            collision: hits.collision(),
            success,
            timeout,
            failure_to_progress: self.failure_to_progress,
            stalled_time: self.stalled,
            time_to_reach_goal: self.steps,
            stl,
            spl,
            path_length: self.path_length,
            speed,
            v_min,
            v_avg,
            v_max,
            a_min,
            a_avg,
            a_max,
            jerk_min,
            jerk_avg,
            jerk_max,
            time_to_collision: self.min_ttc,
            minimum_distance_to_human: self.min_human,
            minimum_obstacle_distance: self.min_obstacle,
            average_obstacle_distance: (self.obstacle_count > 0)
                .then(|| self.obstacle_sum / self.obstacle_count as f64),
            closest_human_dist: human,
            closest_obstacle_dist: obstacle,
            personal_space_compliance: self.psc_ok as f64 / self.steps as f64,
            discomfort_dsrnn: 0.0,
            distance_reward: 0.0,
            sngnn_reward: None,
            alive_reward: 0.0,
            reward: 0.0,
            reward_piece: RewardPiece::Progress,
            interactions: Relationships::default(),
        }
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// (SPL, STL) for one episode.
pub fn success_weighted(
    success: bool,
    shortest: f64,
    path: f64,
    steps: u32,
    v_max: f64,
    dt: f64,
) -> (f64, f64) {
    if !success {
        return (0.0, 0.0);
    }
    let spl = if shortest == 0.0 {
        1.0
    } else {
        shortest / path.max(shortest)
    };
    let optimal_steps = shortest / (v_max * dt);
    let t = steps as f64;
    let stl = if optimal_steps == 0.0 {
        1.0
    } else {
        optimal_steps / t.max(optimal_steps)
    };
    (spl, stl)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    CollisionHuman,
    CollisionObject,
    CollisionWall,
    OutOfMap,
    Timeout,
    Unfinished,
}

impl Outcome {
    pub fn of(info: &StepInfo) -> Outcome {
        if info.success {
            Outcome::Success
        } else if info.collision_human {
            Outcome::CollisionHuman
        } else if info.collision_object {
            Outcome::CollisionObject
        } else if info.collision_wall {
            Outcome::CollisionWall
        } else if info.out_of_map {
            Outcome::OutOfMap
        } else if info.timeout {
            Outcome::Timeout
        } else {
            Outcome::Unfinished
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub steps: u32,
    pub total_reward: f64,
    pub shortest_path: f64,
    pub path_length: f64,
    pub spl: f64,
    pub stl: f64,
    pub personal_space_compliance: f64,
    pub failure_to_progress: u32,
    pub stalled_time: u32,
    pub time_to_reach_goal: u32,
    pub time_to_collision: f64,
    pub v_min: f64,
    pub v_avg: f64,
    pub v_max: f64,
    pub a_min: f64,
    pub a_avg: f64,
    pub a_max: f64,
    pub jerk_min: f64,
    pub jerk_avg: f64,
    pub jerk_max: f64,
    pub minimum_distance_to_human: Option<f64>,
    pub minimum_obstacle_distance: Option<f64>,
    pub average_obstacle_distance: Option<f64>,
}

impl EpisodeSummary {
    /// Numeric fields averaged by [`aggregate`].
    pub fn numeric_fields(&self) -> [(&'static str, Option<f64>); 21] {
        [
            ("steps", Some(self.steps as f64)),
            ("total_reward", Some(self.total_reward)),
            ("path_length", Some(self.path_length)),
            ("spl", Some(self.spl)),
            ("stl", Some(self.stl)),
            (
                "personal_space_compliance",
                Some(self.personal_space_compliance),
            ),
            ("failure_to_progress", Some(self.failure_to_progress as f64)),
            ("stalled_time", Some(self.stalled_time as f64)),
            ("time_to_reach_goal", Some(self.time_to_reach_goal as f64)),
            ("time_to_collision", Some(self.time_to_collision)),
            ("v_min", Some(self.v_min)),
            ("v_avg", Some(self.v_avg)),
            ("v_max", Some(self.v_max)),
            ("a_min", Some(self.a_min)),
            ("a_avg", Some(self.a_avg)),
            ("a_max", Some(self.a_max)),
            ("jerk_min", Some(self.jerk_min)),
            ("jerk_avg", Some(self.jerk_avg)),
            ("jerk_max", Some(self.jerk_max)),
            ("minimum_distance_to_human", self.minimum_distance_to_human),
            ("minimum_obstacle_distance", self.minimum_obstacle_distance),
        ]
    }
}

/// Summarises a finished episode. `infos` must not be empty.
pub fn finalize(infos: &[StepInfo], shortest_path: f64, v_max: f64, dt: f64) -> EpisodeSummary {
    let last = infos.last().expect("finalize needs at least one step");
    let steps = infos.len() as u32;
    let speeds: Vec<f64> = infos.iter().map(|i| i.speed).collect();
    let (v, a, j) = kinematics(&speeds, dt);
    let (v_min, v_avg, v_max_seen) = v.triple();
    let (a_min, a_avg, a_max) = a.triple();
    let (jerk_min, jerk_avg, jerk_max) = j.triple();
    let (spl, stl) = success_weighted(
        last.success,
        shortest_path,
        last.path_length,
        steps,
        v_max,
        dt,
    );
    EpisodeSummary {
        outcome: Outcome::of(last),
        steps,
        total_reward: infos.iter().map(|i| i.reward).sum(),
        shortest_path,
        path_length: last.path_length,
        spl,
        stl,
        personal_space_compliance: last.personal_space_compliance,
        failure_to_progress: last.failure_to_progress,
        stalled_time: last.stalled_time,
        time_to_reach_goal: last.time_to_reach_goal,
        time_to_collision: last.time_to_collision,
        v_min,
        v_avg,
        v_max: v_max_seen,
        a_min,
        a_avg,
        a_max,
        jerk_min,
        jerk_avg,
        jerk_max,
        minimum_distance_to_human: last.minimum_distance_to_human,
        minimum_obstacle_distance: last.minimum_obstacle_distance,
        average_obstacle_distance: last.average_obstacle_distance,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub human_collision_rate: f64,
    pub object_collision_rate: f64,
    pub wall_collision_rate: f64,
    pub out_of_map_rate: f64,
    pub timeout_rate: f64,
    /// Means of numeric metrics; fields missing in some episodes average over
    /// the episodes that have them.
    pub means: BTreeMap<String, f64>,
}

/// Means and outcome rates over `summaries`, which must not be empty.
pub fn aggregate(summaries: &[EpisodeSummary]) -> RunAggregate {
    assert!(
        !summaries.is_empty(),
        "aggregate needs at least one episode"
    );
    let n = summaries.len() as f64;
    let rate =
        |f: &dyn Fn(Outcome) -> bool| summaries.iter().filter(|s| f(s.outcome)).count() as f64 / n;
    let mut sums: BTreeMap<String, (f64, u32)> = BTreeMap::new();
    for s in summaries {
        for (name, value) in s.numeric_fields() {
            if let Some(v) = value {
                let e = sums.entry(String::from(name)).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    RunAggregate {
        episodes: summaries.len(),
        success_rate: rate(&|o| o == Outcome::Success),
        collision_rate: rate(&|o| {
            matches!(
                o,
                Outcome::CollisionHuman | Outcome::CollisionObject | Outcome::CollisionWall
            )
        }),
        human_collision_rate: rate(&|o| o == Outcome::CollisionHuman),
        object_collision_rate: rate(&|o| o == Outcome::CollisionObject),
        wall_collision_rate: rate(&|o| o == Outcome::CollisionWall),
        out_of_map_rate: rate(&|o| o == Outcome::OutOfMap),
        timeout_rate: rate(&|o| o == Outcome::Timeout),
        means: sums
            .into_iter()
            .map(|(k, (s, c))| (k, s / c as f64))
            .collect(),
    }
}

/// Value plotted in a discomfort heatmap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeatmapField {
    /// Proximity piece of the DSRNN reward; −1 where the robot would overlap
    /// a human.
    Dsrnn,
    Surrogate(SurrogateParams),
}

/// N×N grid over the room's bounding box, row-major, row 0 at the lowest y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub n: usize,
    pub lo: Vec2,
    pub hi: Vec2,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }
}

pub fn cell_center(lo: Vec2, hi: Vec2, n: usize, row: usize, col: usize) -> Vec2 {
    Vec2::new(
        lo.x + (col as f64 + 0.5) * (hi.x - lo.x) / n as f64,
        lo.y + (row as f64 + 0.5) * (hi.y - lo.y) / n as f64,
    )
}

/// Field value with the robot centre virtually at `p`.
pub fn field_at(world: &World, field: &HeatmapField, params: &RewardParams, p: Vec2) -> f64 {
    match field {
        HeatmapField::Surrogate(s) => s.score_at(world, p),
        HeatmapField::Dsrnn => {
            let r = world.robot.entity.radius;
            let s = world
                .humans
                .iter()
                .map(|h| circle_circle_dist(p, r, h.entity.position(), h.entity.radius))
                .fold(f64::INFINITY, f64::min);
            if s <= 0.0 {
                -1.0
            } else {
                dsrnn_discomfort(s, params)
            }
        }
    }
}

pub fn heatmap_row(
    world: &World,
    field: &HeatmapField,
    params: &RewardParams,
    n: usize,
    row: usize,
) -> Vec<f64> {
    let (lo, hi) = world.room.bounds();
    (0..n)
        .map(|col| field_at(world, field, params, cell_center(lo, hi, n, row, col)))
        .collect()
}

pub fn heatmap(world: &World, field: &HeatmapField, params: &RewardParams, n: usize) -> Heatmap {
    assert!(n >= 2, "heatmap needs N >= 2");
    let (lo, hi) = world.room.bounds();
    let values = (0..n)
        .flat_map(|row| heatmap_row(world, field, params, n, row))
        .collect();
    Heatmap { n, lo, hi, values }
}

/// Heatmap from an arbitrary scorer, moving a copy of the robot to each cell.
pub fn heatmap_with_scorer(
    world: &World,
    scorer: &mut dyn SocialScorer,
    n: usize,
) -> Result<Heatmap, ScorerError> {
    assert!(n >= 2, "heatmap needs N >= 2");
    let (lo, hi) = world.room.bounds();
    let mut probe = world.clone();
    let mut values = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            probe
                .robot
                .entity
                .pose
                .set_position(cell_center(lo, hi, n, row, col));
            values.push(scorer.score(&probe)?);
        }
    }
    Ok(Heatmap { n, lo, hi, values })
}
