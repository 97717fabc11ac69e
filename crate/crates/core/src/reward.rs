//! Reward functions and the social-score boundary.

use alloc::boxed::Box;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::ScorerError;
use crate::geometry::{circle_circle_dist, point_segment_distance, Vec2};
use crate::scenario::{InteractionKind, World};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta_disc: f64,
    pub delta: f64,
    /// Goal radius ρ (m).
    pub goal_radius: f64,
    pub dt: f64,
}

impl From<&ScenarioConfig> for RewardParams {
    fn from(c: &ScenarioConfig) -> Self {
        RewardParams {
            alpha: c.reward.alpha,
            beta: c.reward.beta,
            delta_disc: c.reward.delta_disc,
            delta: c.reward.delta,
            goal_radius: c.reward.goal_radius,
            dt: c.episode.dt,
        }
    }
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams::from(&ScenarioConfig::default())
    }
}

/// Quantities one reward evaluation needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepContext {
    /// Centre distance from the robot to the closest relevant entity;
    /// infinite when there is none.
    pub d_min: f64,
    pub r_agent: f64,
    /// Radius of that closest entity.
    pub r_entity: f64,
    pub d_goal_prev: f64,
    pub d_goal: f64,
    /// Any robot collision this step, including walls and leaving the map.
    pub collided: bool,
}

impl StepContext {
    /// Surface distance to the closest entity.
    pub fn surface(&self) -> f64 {
        self.d_min - (self.r_agent + self.r_entity)
    }

    pub fn in_collision(&self) -> bool {
        self.collided || self.d_min <= self.r_agent + self.r_entity
    }
}

/// Which branch of a piecewise reward produced the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardPiece {
    Collision,
    Discomfort,
    Goal,
    Progress,
    Custom,
}

/// Linear proximity penalty for surface distance `s`; zero outside
/// `(0, δ_disc)`.
pub fn dsrnn_discomfort(s: f64, p: &RewardParams) -> f64 {
    if s > 0.0 && s < p.delta_disc {
        (s - p.delta_disc) * p.alpha * p.dt
    } else {
        0.0
    }
}

pub fn progress_reward(ctx: &StepContext, p: &RewardParams) -> f64 {
    (ctx.d_goal_prev - ctx.d_goal) * p.beta
}

pub fn dsrnn_piece(ctx: &StepContext, p: &RewardParams) -> (f64, RewardPiece) {
    if ctx.in_collision() {
        return (-1.0, RewardPiece::Collision);
    }
    let s = ctx.surface();
    if s > 0.0 && s < p.delta_disc {
        return (dsrnn_discomfort(s, p), RewardPiece::Discomfort);
    }
    if ctx.d_goal <= p.goal_radius {
        return (1.0, RewardPiece::Goal);
    }
    (progress_reward(ctx, p), RewardPiece::Progress)
}

pub fn dsrnn_reward(ctx: &StepContext, p: &RewardParams) -> f64 {
    dsrnn_piece(ctx, p).0
}

/// Penalty term `(score − 1)·δ`.
pub fn sngnn_penalty(score: f64, p: &RewardParams) -> f64 {
    (score - 1.0) * p.delta
}

pub fn sngnn_piece(ctx: &StepContext, p: &RewardParams, score: f64) -> (f64, RewardPiece) {
    if ctx.in_collision() {
        return (-1.0, RewardPiece::Collision);
    }
    if ctx.d_goal <= p.goal_radius {
        return (1.0, RewardPiece::Goal);
    }
    (
        progress_reward(ctx, p) + sngnn_penalty(score, p),
        RewardPiece::Progress,
    )
}

pub fn sngnn_reward(ctx: &StepContext, p: &RewardParams, score: f64) -> f64 {
    sngnn_piece(ctx, p, score).0
}

/// Scores how socially acceptable the robot's placement in a scene is, from
/// 1 (no disturbance) to 0.
pub trait SocialScorer: Send {
    fn name(&self) -> &str;
    fn score(&mut self, world: &World) -> Result<f64, ScorerError>;
}

/// User-supplied reward, selected with `function = "custom"`.
pub trait RewardFunction: Send {
    fn reward(&mut self, ctx: &StepContext, world: &World) -> Result<f64, ScorerError>;
}

/// Validates a raw score against the `[0, 1]` contract.
pub fn check_score(x: f64) -> Result<f64, ScorerError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(ScorerError::OutOfRange(x))
    }
}

/// Shape of the analytic stand-in for a learned social scorer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    /// Spread of a human's personal space ahead of them (m).
    pub sigma_front: f64,
    pub sigma_back: f64,
    pub sigma_side: f64,
    /// Peak disturbance for entering an interaction.
    pub interaction_weight: f64,
    /// Fall-off outside a crowd's circle (m).
    pub sigma_crowd: f64,
    /// Fall-off around a human-laptop line (m).
    pub sigma_laptop: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            sigma_front: 0.9,
            sigma_back: 0.5,
            sigma_side: 0.6,
            interaction_weight: 0.9,
            sigma_crowd: 0.5,
            sigma_laptop: 0.3,
        }
    }
}

fn gauss(d: f64, sigma: f64) -> f64 {
    libm::exp(-(d * d) / (2.0 * sigma * sigma))
}

impl SurrogateParams {
    /// Score with the robot centre at `robot`, ignoring where it really is.
    pub fn score_at(&self, world: &World, robot: Vec2) -> f64 {
        let mut score = 1.0;
        for h in &world.humans {
            let local = h.entity.pose.to_local(robot);
            let along = if local.x >= 0.0 {
                self.sigma_front
            } else {
                self.sigma_back
            };
            let field = gauss(local.x, along) * gauss(local.y, self.sigma_side);
            score *= 1.0 - field;
        }
        for i in &world.interactions {
            let field = match &i.kind {
                InteractionKind::HumanCrowd { center, radius, .. } => {
                    let outside = (robot.distance(*center) - radius).max(0.0);
                    gauss(outside, self.sigma_crowd)
                }
                InteractionKind::HumanLaptop { human, laptop } => {
                    match (world.human(*human), world.object(*laptop)) {
                        (Some(h), Some(l)) => {
                            let d =
                                point_segment_distance(robot, h.entity.position(), l.position());
                            gauss(d, self.sigma_laptop)
                        }
                        _ => 0.0,
                    }
                }
            };
            score *= 1.0 - self.interaction_weight * field;
        }
        score.clamp(0.0, 1.0)
    }
}

/// Built-in scorer: humans' anisotropic personal space plus interaction
/// areas.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SurrogateScorer {
    pub params: SurrogateParams,
}

impl SocialScorer for SurrogateScorer {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn score(&mut self, world: &World) -> Result<f64, ScorerError> {
        check_score(self.params.score_at(world, world.robot.entity.position()))
    }
}

pub fn surrogate_score(world: &World) -> f64 {
    SurrogateParams::default().score_at(world, world.robot.entity.position())
}

/// Scorers available without IO. Richer registries live in the host crate.
pub fn builtin_scorer(name: &str) -> Result<Box<dyn SocialScorer>, ScorerError> {
    match name {
        "surrogate" => Ok(Box::new(SurrogateScorer::default())),
        other => Err(ScorerError::UnknownScorer(String::from(other))),
    }
}

/// Context for the robot in `world` given the previous goal distance.
pub fn step_context(
    world: &World,
    d_goal_prev: f64,
    collided: bool,
    all_entities: bool,
) -> StepContext {
    let robot = &world.robot.entity;
    let p = robot.position();
    let mut best = (f64::INFINITY, 0.0, f64::INFINITY);
    let mut consider = |q: Vec2, r: f64| {
        let s = circle_circle_dist(p, robot.radius, q, r);
        if s < best.2 {
            best = (p.distance(q), r, s);
        }
    };
    for h in &world.humans {
        consider(h.entity.position(), h.entity.radius);
    }
    if all_entities {
        for o in &world.objects {
            consider(o.position(), o.radius);
        }
    }
    StepContext {
        d_min: best.0,
        r_agent: robot.radius,
        r_entity: best.1,
        d_goal_prev,
        d_goal: p.distance(world.goal.position),
        collided,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::geometry::Pose2D;
    use crate::scenario::generate;
    use proptest::prelude::*;

    fn ctx(d_min: f64, d_goal_prev: f64, d_goal: f64) -> StepContext {
        StepContext {
            d_min,
            r_agent: 0.3,
            r_entity: 0.3,
            d_goal_prev,
            d_goal,
            collided: false,
        }
    }

    fn params() -> RewardParams {
        RewardParams {
            alpha: 1.0,
            beta: 1.0,
            delta_disc: 0.6,
            delta: 1.0,
            goal_radius: 0.5,
            dt: 0.1,
        }
    }

    #[test]
    fn dsrnn_examples() {
        let p = params();
        assert!((dsrnn_reward(&ctx(0.9, 5.0, 5.0), &p) + 0.03).abs() < 1e-12);
        assert_eq!(dsrnn_reward(&ctx(0.55, 5.0, 5.0), &p), -1.0);
        assert_eq!(dsrnn_reward(&ctx(f64::INFINITY, 0.3, 0.2), &p), 1.0);
        assert!((dsrnn_reward(&ctx(f64::INFINITY, 5.0, 4.9), &p) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn sngnn_examples() {
        let p = params();
        let c = ctx(f64::INFINITY, 5.0, 4.9);
        assert!((sngnn_reward(&c, &p, 1.0) - 0.1).abs() < 1e-12);
        assert!((sngnn_reward(&c, &p, 0.0) + 0.9).abs() < 1e-12);
        assert_eq!(sngnn_reward(&ctx(0.5, 5.0, 4.9), &p, 1.0), -1.0);
    }

    proptest! {
        #[test]
        fn discomfort_bounds_and_monotone(a in 0.0f64..0.6, b in 0.0f64..0.6) {
            let p = params();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo > 0.0);
            let (fl, fh) = (dsrnn_discomfort(lo, &p), dsrnn_discomfort(hi, &p));
            prop_assert!(fl > -p.delta_disc * p.alpha * p.dt && fl < 0.0);
            prop_assert!(fl <= fh);
        }

        #[test]
        fn penalty_within_delta(score in 0.0f64..=1.0, delta in 0.0f64..5.0) {
            let p = RewardParams { delta, ..params() };
            let pen = sngnn_penalty(score, &p);
            prop_assert!(pen >= -delta && pen <= 0.0);
        }

        #[test]
        fn goal_dominates(d_goal in 0.0f64..0.5, d_min in 1.3f64..10.0) {
            let p = params();
            prop_assert_eq!(dsrnn_reward(&ctx(d_min, 1.0, d_goal), &p), 1.0);
            prop_assert_eq!(sngnn_reward(&ctx(d_min, 1.0, d_goal), &p, 0.3), 1.0);
        }
    }

    #[test]
    fn out_of_range_scores_rejected() {
        assert_eq!(check_score(1.2), Err(ScorerError::OutOfRange(1.2)));
        assert!(check_score(f64::NAN).is_err());
        assert_eq!(check_score(0.0), Ok(0.0));
        assert!(matches!(
            builtin_scorer("nope"),
            Err(ScorerError::UnknownScorer(_))
        ));
        assert_eq!(builtin_scorer("surrogate").unwrap().name(), "surrogate");
    }

    fn lone_human() -> World {
        let mut w = generate(&preset(1).unwrap()).unwrap();
        w.objects.clear();
        w.humans[0].entity.pose = Pose2D::new(0.0, 0.0, 0.0);
        w
    }

    #[test]
    fn surrogate_examples() {
        let w = lone_human();
        let s = SurrogateParams::default();
        assert!(s.score_at(&w, Vec2::new(0.0, 5.0)) > 0.99);
        assert!(s.score_at(&w, Vec2::new(0.0, 0.0)) < 0.05);
        assert!(s.score_at(&w, Vec2::new(0.8, 0.0)) < s.score_at(&w, Vec2::new(-0.8, 0.0)));
    }

    #[test]
    fn surrogate_rigid_invariance() {
        let w = generate(&preset(3).unwrap().with_seed(5)).unwrap();
        let (angle, shift) = (0.7, Vec2::new(1.5, -2.0));
        let mv = |p: Pose2D| {
            let q = p.position().rotate(angle) + shift;
            Pose2D::new(q.x, q.y, p.theta + angle)
        };
        let mut moved = w.clone();
        for h in &mut moved.humans {
            h.entity.pose = mv(h.entity.pose);
        }
        for o in &mut moved.objects {
            o.pose = mv(o.pose);
        }
        for i in &mut moved.interactions {
            if let InteractionKind::HumanCrowd { center, .. } = &mut i.kind {
                *center = center.rotate(angle) + shift;
            }
        }
        moved.robot.entity.pose = mv(w.robot.entity.pose);
        assert!((surrogate_score(&w) - surrogate_score(&moved)).abs() < 1e-12);
    }
}
