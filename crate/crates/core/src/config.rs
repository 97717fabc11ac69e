//! Scenario configuration: every generation, episode, observation and reward
//! parameter, grouped into the sections of the on-disk config file.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crowd::{OrcaParams, SfmParams, DEFAULT_GOAL_TOLERANCE};
use crate::error::{ConfigViolation, ScenarioError};
use crate::geometry::Wall;
use crate::room::RoomShape;

/// Inclusive integer range; a single number in the file means `min == max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "CountRepr", into = "CountRepr")]
pub struct CountRange {
    pub min: u32,
    pub max: u32,
}

impl CountRange {
    pub const ZERO: CountRange = CountRange { min: 0, max: 0 };

    pub const fn exactly(n: u32) -> Self {
        CountRange { min: n, max: n }
    }
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum CountRepr {
    Fixed(u32),
    Range([u32; 2]),
}

impl From<CountRepr> for CountRange {
    fn from(r: CountRepr) -> Self {
        match r {
            CountRepr::Fixed(n) => CountRange::exactly(n),
            CountRepr::Range([a, b]) => CountRange { min: a, max: b },
        }
    }
}

impl From<CountRange> for CountRepr {
    fn from(c: CountRange) -> Self {
        if c.min == c.max {
            CountRepr::Fixed(c.min)
        } else {
            CountRepr::Range([c.min, c.max])
        }
    }
}

/// Closed real interval, written `[min, max]` or as a single number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpanRepr", into = "SpanRepr")]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub const fn new(min: f64, max: f64) -> Self {
        Span { min, max }
    }
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum SpanRepr {
    Fixed(f64),
    Range([f64; 2]),
}

impl From<SpanRepr> for Span {
    fn from(r: SpanRepr) -> Self {
        match r {
            SpanRepr::Fixed(v) => Span::new(v, v),
            SpanRepr::Range([a, b]) => Span::new(a, b),
        }
    }
}

impl From<Span> for SpanRepr {
    fn from(s: Span) -> Self {
        if s.min == s.max {
            SpanRepr::Fixed(s.min)
        } else {
            SpanRepr::Range([s.min, s.max])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomKind {
    Square,
    Rectangle,
    LShaped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoomConfig {
    pub shape: RoomKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notch_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notch_height: Option<f64>,
    pub wall_thickness: f64,
    pub corridors: Vec<Wall>,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            shape: RoomKind::Square,
            side: Some(10.0),
            width: None,
            height: None,
            notch_width: None,
            notch_height: None,
            wall_thickness: 0.0,
            corridors: Vec::new(),
        }
    }
}

impl RoomConfig {
    /// Resolves the keyed fields into a room outline.
    pub fn shape(&self) -> Result<RoomShape, Vec<ConfigViolation>> {
        let mut errs = Vec::new();
        let mut need = |name: &str, v: Option<f64>| -> f64 {
            match v {
                Some(x) if x.is_finite() && x > 0.0 => x,
                Some(x) => {
                    errs.push(violation(
                        &format!("room.{name}"),
                        format!("must be a positive number, got {x}"),
                    ));
                    1.0
                }
                None => {
                    errs.push(violation(
                        &format!("room.{name}"),
                        "required for this room shape",
                    ));
                    1.0
                }
            }
        };
        let base = match self.shape {
            RoomKind::Square => RoomShape::Square {
                side: need("side", self.side),
            },
            RoomKind::Rectangle => RoomShape::Rectangle {
                width: need("width", self.width),
                height: need("height", self.height),
            },
            RoomKind::LShaped => {
                let width = need("width", self.width);
                let height = need("height", self.height);
                let notch_width = need("notch_width", self.notch_width);
                let notch_height = need("notch_height", self.notch_height);
                if notch_width >= width || notch_height >= height {
                    errs.push(violation(
                        "room.notch_width",
                        "notch must be strictly smaller than the outer rectangle",
                    ));
                }
                RoomShape::LShaped {
                    width,
                    height,
                    notch_width,
                    notch_height,
                }
            }
        };
        for (i, c) in self.corridors.iter().enumerate() {
            if let Err(e) = c.validate() {
                errs.push(violation(&format!("room.corridors[{i}]"), e.to_string()));
            }
        }
        if !errs.is_empty() {
            return Err(errs);
        }
        Ok(if self.corridors.is_empty() {
            base
        } else {
            RoomShape::WithCorridors {
                base: Box::new(base),
                corridors: self.corridors.clone(),
            }
        })
    }

    pub fn square(side: f64) -> Self {
        RoomConfig {
            side: Some(side),
            ..RoomConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Steering {
    Holonomic,
    NonHolonomic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete,
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotConfig {
    pub radius: f64,
    pub steering: Steering,
    pub action_space: ActionSpace,
    /// Linear speed cap (m/s).
    pub max_speed: f64,
    /// Angular speed cap (rad/s).
    pub max_angular_speed: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            radius: 0.3,
            steering: Steering::NonHolonomic,
            action_space: ActionSpace::Discrete,
            max_speed: 1.0,
            max_angular_speed: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    Orca,
    Sfm,
    /// Coin flip per spawned human.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumanConfig {
    /// Individually wandering humans.
    pub count: CountRange,
    /// Individually standing humans.
    pub static_count: CountRange,
    pub radius: f64,
    pub policy: PolicyChoice,
    pub consider_robot: bool,
    pub fov_deg: f64,
    /// When set, policies only react to entities inside the human's FoV.
    pub fov_limits_policy: bool,
    pub goal_tolerance: f64,
    /// Relative standard deviation of the per-human parameter draw.
    pub param_rel_std: f64,
    pub orca: OrcaParams,
    pub sfm: SfmParams,
}

impl Default for HumanConfig {
    fn default() -> Self {
        HumanConfig {
            count: CountRange::ZERO,
            static_count: CountRange::ZERO,
            radius: 0.3,
            policy: PolicyChoice::Random,
            consider_robot: true,
            fov_deg: 180.0,
            fov_limits_policy: false,
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
            param_rel_std: 0.1,
            orca: OrcaParams::default(),
            sfm: SfmParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectConfig {
    pub plants: CountRange,
    pub tables: CountRange,
    pub laptops: CountRange,
    pub plant_radius: f64,
    pub laptop_radius: f64,
    pub table_radius: Span,
    /// Put each laptop on a table (round-robin) when tables exist.
    pub laptops_on_tables: bool,
}

impl Default for ObjectConfig {
    fn default() -> Self {
        ObjectConfig {
            plants: CountRange::ZERO,
            tables: CountRange::ZERO,
            laptops: CountRange::ZERO,
            plant_radius: 0.4,
            laptop_radius: 0.25,
            table_radius: Span::new(0.7, 1.2),
            laptops_on_tables: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionConfig {
    pub static_crowds: CountRange,
    pub dynamic_crowds: CountRange,
    pub crowd_size: CountRange,
    pub crowd_radius: Span,
    /// Humans paired with a laptop; each may start interacting or not.
    pub human_laptop: CountRange,
    /// Laptop interactions form and break during the episode.
    pub laptop_events: bool,
    /// Dynamic crowds disperse and re-form during the episode.
    pub crowd_events: bool,
    pub events_per_interaction: u32,
    /// Probability that a dispersing crowd member stays where it is.
    pub disperse_static_prob: f64,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            static_crowds: CountRange::ZERO,
            dynamic_crowds: CountRange::ZERO,
            crowd_size: CountRange::exactly(3),
            crowd_radius: Span::new(0.6, 1.2),
            human_laptop: CountRange::ZERO,
            laptop_events: false,
            crowd_events: false,
            events_per_interaction: 1,
            disperse_static_prob: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub dt: f64,
    pub max_steps: u32,
    pub seed: u64,
    /// Minimum start-to-goal distance beyond the goal radius (m).
    pub min_goal_distance: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            dt: 0.1,
            max_steps: 200,
            seed: 0,
            min_goal_distance: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Robot,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationSection {
    pub frame: Frame,
    pub robot_fov_deg: f64,
    /// Sensor range in metres; absent means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robot_range: Option<f64>,
    pub include_relationships: bool,
}

impl Default for ObservationSection {
    fn default() -> Self {
        ObservationSection {
            frame: Frame::Robot,
            robot_fov_deg: 360.0,
            robot_range: None,
            include_relationships: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub humans: Option<NoiseSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objects: Option<NoiseSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walls: Option<NoiseSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Dsrnn,
    Sngnn,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub function: RewardKind,
    pub alpha: f64,
    pub beta: f64,
    pub delta_disc: f64,
    pub delta: f64,
    pub goal_radius: f64,
    /// Apply the proximity discomfort to objects as well as humans.
    pub discomfort_all_entities: bool,
    pub alive_reward: f64,
    /// Social scorer descriptor (`surrogate`, `process:<cmd>`, `file:<path>`).
    pub scorer: String,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            function: RewardKind::Dsrnn,
            alpha: 1.0,
            beta: 1.0,
            delta_disc: 0.6,
            delta: 1.0,
            goal_radius: 0.5,
            discomfort_all_entities: false,
            alive_reward: 0.0,
            scorer: String::from("surrogate"),
        }
    }
}

/// Complete scenario and episode description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub room: RoomConfig,
    pub robot: RobotConfig,
    pub humans: HumanConfig,
    pub objects: ObjectConfig,
    pub interactions: InteractionConfig,
    pub episode: EpisodeConfig,
    pub observation: ObservationSection,
    pub noise: NoiseConfig,
    pub reward: RewardConfig,
}

fn violation(field: &str, message: impl Into<String>) -> ConfigViolation {
    ConfigViolation {
        field: field.to_string(),
        message: message.into(),
    }
}

struct Checker {
    errs: Vec<ConfigViolation>,
}

impl Checker {
    fn positive(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.errs
                .push(violation(field, format!("must be > 0, got {v}")));
        }
    }

    fn non_negative(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.errs
                .push(violation(field, format!("must be >= 0, got {v}")));
        }
    }

    fn finite(&mut self, field: &str, v: f64) {
        if !v.is_finite() {
            self.errs
                .push(violation(field, format!("must be finite, got {v}")));
        }
    }

    fn fov(&mut self, field: &str, v: f64) {
        if !(v > 0.0 && v <= 360.0) {
            self.errs
                .push(violation(field, format!("must lie in (0, 360], got {v}")));
        }
    }

    fn probability(&mut self, field: &str, v: f64) {
        if !(0.0..=1.0).contains(&v) {
            self.errs
                .push(violation(field, format!("must lie in [0, 1], got {v}")));
        }
    }

    fn count(&mut self, field: &str, c: CountRange) {
        if c.min > c.max {
            self.errs.push(violation(
                field,
                format!("range [{}, {}] is empty", c.min, c.max),
            ));
        }
    }

    fn span(&mut self, field: &str, s: Span) {
        self.positive(field, s.min);
        if s.min > s.max {
            self.errs.push(violation(
                field,
                format!("range [{}, {}] is empty", s.min, s.max),
            ));
        }
    }
}

impl ScenarioConfig {
    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), Vec<ConfigViolation>> {
        let mut c = Checker { errs: Vec::new() };
        if let Err(mut e) = self.room.shape() {
            c.errs.append(&mut e);
        }
        c.non_negative("room.wall_thickness", self.room.wall_thickness);

        let r = &self.robot;
        c.positive("robot.radius", r.radius);
        c.positive("robot.max_speed", r.max_speed);
        c.positive("robot.max_angular_speed", r.max_angular_speed);

        let h = &self.humans;
        c.count("humans.count", h.count);
        c.count("humans.static_count", h.static_count);
        c.positive("humans.radius", h.radius);
        c.fov("humans.fov_deg", h.fov_deg);
        c.positive("humans.goal_tolerance", h.goal_tolerance);
        c.non_negative("humans.param_rel_std", h.param_rel_std);
        c.positive("humans.orca.time_horizon", h.orca.time_horizon);
        c.positive(
            "humans.orca.time_horizon_obstacles",
            h.orca.time_horizon_obstacles,
        );
        c.positive("humans.orca.neighbor_dist", h.orca.neighbor_dist);
        c.positive("humans.orca.max_speed", h.orca.max_speed);
        c.positive("humans.sfm.relaxation_time", h.sfm.relaxation_time);
        c.positive(
            "humans.sfm.interaction_strength",
            h.sfm.interaction_strength,
        );
        c.positive("humans.sfm.interaction_range", h.sfm.interaction_range);
        c.non_negative("humans.sfm.obstacle_strength", h.sfm.obstacle_strength);
        c.positive("humans.sfm.obstacle_range", h.sfm.obstacle_range);
        c.positive("humans.sfm.desired_speed", h.sfm.desired_speed);

        let o = &self.objects;
        c.count("objects.plants", o.plants);
        c.count("objects.tables", o.tables);
        c.count("objects.laptops", o.laptops);
        c.positive("objects.plant_radius", o.plant_radius);
        c.positive("objects.laptop_radius", o.laptop_radius);
        c.span("objects.table_radius", o.table_radius);
        if o.laptops_on_tables && o.tables.min > 0 && o.laptop_radius >= o.table_radius.min {
            c.errs.push(violation(
                "objects.laptop_radius",
                "a laptop must fit on the smallest table",
            ));
        }

        let i = &self.interactions;
        c.count("interactions.static_crowds", i.static_crowds);
        c.count("interactions.dynamic_crowds", i.dynamic_crowds);
        c.count("interactions.crowd_size", i.crowd_size);
        if i.crowd_size.min < 2 && (i.static_crowds.max > 0 || i.dynamic_crowds.max > 0) {
            c.errs.push(violation(
                "interactions.crowd_size",
                "crowds need at least 2 members",
            ));
        }
        c.span("interactions.crowd_radius", i.crowd_radius);
        c.count("interactions.human_laptop", i.human_laptop);
        if i.human_laptop.max > o.laptops.min {
            c.errs.push(violation(
                "interactions.human_laptop",
                "needs at least as many laptops (objects.laptops)",
            ));
        }
        c.probability("interactions.disperse_static_prob", i.disperse_static_prob);

        let e = &self.episode;
        c.positive("episode.dt", e.dt);
        if e.max_steps == 0 {
            c.errs.push(violation("episode.max_steps", "must be > 0"));
        }
        c.non_negative("episode.min_goal_distance", e.min_goal_distance);

        let ob = &self.observation;
        c.fov("observation.robot_fov_deg", ob.robot_fov_deg);
        if let Some(range) = ob.robot_range {
            if !(range > 0.0) {
                c.errs.push(violation(
                    "observation.robot_range",
                    format!("must be > 0, got {range}"),
                ));
            }
        }
        for (name, n) in [
            ("noise.humans", self.noise.humans),
            ("noise.objects", self.noise.objects),
            ("noise.walls", self.noise.walls),
        ] {
            if let Some(n) = n {
                c.finite(&format!("{name}.mean"), n.mean);
                c.non_negative(&format!("{name}.std"), n.std);
            }
        }

        let rw = &self.reward;
        c.positive("reward.alpha", rw.alpha);
        c.positive("reward.beta", rw.beta);
        c.positive("reward.delta_disc", rw.delta_disc);
        c.positive("reward.delta", rw.delta);
        c.positive("reward.goal_radius", rw.goal_radius);
        c.finite("reward.alive_reward", rw.alive_reward);
        if rw.scorer.is_empty() {
            c.errs
                .push(violation("reward.scorer", "must name a scorer"));
        }

        if c.errs.is_empty() {
            Ok(())
        } else {
            Err(c.errs)
        }
    }

    /// Maps an explicit infinite sensor range onto "unlimited".
    pub fn normalized(mut self) -> Self {
        if matches!(self.observation.robot_range, Some(r) if r.is_infinite() && r > 0.0) {
            self.observation.robot_range = None;
        }
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.episode.seed = seed;
        self
    }
}

/// The three published experiment scenarios, all with a non-holonomic robot
/// in a 10 m × 10 m square room.
///
/// 1. one plant and one wandering human;
/// 2. one table with a laptop on it, a static crowd of three, a moving crowd
///    of three and one human whose laptop interaction forms and breaks;
/// 3. as 2, with the moving crowd also dispersing and re-forming.
pub fn preset(experiment: u8) -> Result<ScenarioConfig, ScenarioError> {
    let mut cfg = ScenarioConfig {
        room: RoomConfig::square(10.0),
        robot: RobotConfig {
            steering: Steering::NonHolonomic,
            ..RobotConfig::default()
        },
        ..ScenarioConfig::default()
    };
    match experiment {
        1 => {
            cfg.objects.plants = CountRange::exactly(1);
            cfg.humans.count = CountRange::exactly(1);
        }
        2 | 3 => {
            cfg.objects.tables = CountRange::exactly(1);
            cfg.objects.laptops = CountRange::exactly(1);
            cfg.interactions.static_crowds = CountRange::exactly(1);
            cfg.interactions.dynamic_crowds = CountRange::exactly(1);
            cfg.interactions.crowd_size = CountRange::exactly(3);
            cfg.interactions.human_laptop = CountRange::exactly(1);
            cfg.interactions.laptop_events = true;
            cfg.interactions.crowd_events = experiment == 3;
        }
        other => return Err(ScenarioError::UnknownPreset(other)),
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for k in 1..=3 {
            preset(k).unwrap().validate().unwrap();
        }
        assert_eq!(preset(0), Err(ScenarioError::UnknownPreset(0)));
        assert_eq!(preset(4), Err(ScenarioError::UnknownPreset(4)));
    }

    #[test]
    fn preset_contents() {
        let p1 = preset(1).unwrap();
        assert_eq!(p1.room.shape().unwrap(), RoomShape::Square { side: 10.0 });
        assert_eq!(p1.objects.plants, CountRange::exactly(1));
        assert_eq!(p1.humans.count, CountRange::exactly(1));
        let p2 = preset(2).unwrap();
        assert_eq!(p2.interactions.crowd_size, CountRange::exactly(3));
        assert!(!p2.interactions.crowd_events);
        assert!(preset(3).unwrap().interactions.crowd_events);
    }

    #[test]
    fn violations_are_exhaustive() {
        let mut cfg = ScenarioConfig::default();
        cfg.episode.dt = -0.1;
        cfg.robot.radius = 0.0;
        cfg.observation.robot_fov_deg = 400.0;
        let errs = cfg.validate().unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert!(fields.contains(&"episode.dt"));
        assert!(fields.contains(&"robot.radius"));
        assert!(fields.contains(&"observation.robot_fov_deg"));
        assert_eq!(errs.len(), 3);
    }

    #[test]
    fn l_shape_notch_checked() {
        let mut cfg = ScenarioConfig::default();
        cfg.room = RoomConfig {
            shape: RoomKind::LShaped,
            width: Some(6.0),
            height: Some(6.0),
            notch_width: Some(7.0),
            notch_height: Some(2.0),
            ..RoomConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
