//! Episode loop: reset, step, termination, reward selection and recording.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{RewardKind, ScenarioConfig};
use crate::dynamics::{
    action_table_size, detect_collisions, integrate, resolve_action, Action, SpeedCaps,
};
use crate::entity::EntityId;
use crate::error::{EnvError, ScorerError};
use crate::metrics::{finalize, EpisodeSummary, MetricsAccumulator, StepInfo};
use crate::observe::{observe, relationships, Observation, ObservationConfig};
use crate::reward::{
    builtin_scorer, check_score, dsrnn_discomfort, dsrnn_piece, progress_reward, sngnn_piece,
    step_context, RewardFunction, RewardParams, RewardPiece, SocialScorer,
};
use crate::rng::{Rng, RNG_ALGORITHM};
use crate::scenario::{generate, World};

/// Version tag written into every episode record header.
pub const FORMAT_VERSION: &str = "socnav-episode/1";

/// Stream index of the observation-noise generator.
const OBSERVATION_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format_version: String,
    pub seed: u64,
    pub rng: String,
    pub config: ScenarioConfig,
    /// Actions taken after reset but before recording began.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prefix: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordedStep {
    pub state: World,
    pub action: Action,
    pub reward: f64,
    pub next_state: World,
    pub info: StepInfo,
    pub terminated: bool,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub header: RecordHeader,
    pub steps: Vec<RecordedStep>,
}

/// Outcome of re-simulating a record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps_checked: usize,
    /// Index of the first step whose re-simulation disagrees with the log.
    pub first_divergence: Option<usize>,
}

impl ReplayReport {
    pub fn verified(&self) -> bool {
        self.first_divergence.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error(
        "record format `{found}` is not supported (expected `{}`)",
        FORMAT_VERSION
    )]
    FormatVersion { found: String },
    #[error("record uses generator `{0}`, this build uses `{expected}`", expected = RNG_ALGORITHM)]
    RngAlgorithm(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub struct Env {
    config: ScenarioConfig,
    obs_config: ObservationConfig,
    params: RewardParams,
    caps: SpeedCaps,
    scorer: Option<Box<dyn SocialScorer>>,
    custom: Option<Box<dyn RewardFunction>>,
    world: Option<World>,
    accum: Option<MetricsAccumulator>,
    obs_rng: Rng,
    seed: u64,
    done: bool,
    actions: Vec<Action>,
    infos: Vec<StepInfo>,
    recording: Option<EpisodeRecord>,
}

impl Env {
    /// Builds an environment; the built-in scorer named in the config is
    /// installed when it exists.
    pub fn new(config: ScenarioConfig) -> Result<Env, EnvError> {
        config
            .validate()
            .map_err(crate::error::ScenarioError::InvalidConfig)?;
        let scorer = builtin_scorer(&config.reward.scorer).ok();
        Ok(Env {
            obs_config: ObservationConfig::from(&config),
            params: RewardParams::from(&config),
            caps: SpeedCaps {
                v_max: config.robot.max_speed,
                omega_max: config.robot.max_angular_speed,
            },
            scorer,
            custom: None,
            world: None,
            accum: None,
            obs_rng: Rng::seed_from_u64(0),
            seed: config.episode.seed,
            done: false,
            actions: Vec::new(),
            infos: Vec::new(),
            recording: None,
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> Option<&World> {
        self.world.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn caps(&self) -> SpeedCaps {
        self.caps
    }

    pub fn reward_params(&self) -> RewardParams {
        self.params
    }

    pub fn action_table_size(&self) -> usize {
        action_table_size(self.config.robot.steering)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Infos of the current episode so far.
    pub fn infos(&self) -> &[StepInfo] {
        &self.infos
    }

    pub fn set_scorer(&mut self, scorer: Box<dyn SocialScorer>) {
        self.scorer = Some(scorer);
    }

    pub fn set_custom_reward(&mut self, reward: Box<dyn RewardFunction>) {
        self.custom = Some(reward);
    }

    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        match self.config.reward.function {
            RewardKind::Sngnn if self.scorer.is_none() => {
                return Err(ScorerError::UnknownScorer(self.config.reward.scorer.clone()).into());
            }
            RewardKind::Custom if self.custom.is_none() => {
                return Err(EnvError::MissingCustomReward)
            }
            _ => {}
        }
        self.config.episode.seed = seed;
        let world = generate(&self.config)?;
        self.seed = seed;
        self.accum = Some(MetricsAccumulator::new(&world, self.caps.v_max));
        self.obs_rng = Rng::derive(seed, OBSERVATION_STREAM);
        self.done = false;
        self.actions.clear();
        self.infos.clear();
        if self.recording.is_some() {
            self.recording = Some(self.new_record());
        }
        let obs = observe(&world, &self.obs_config, &mut self.obs_rng);
        self.world = Some(world);
        Ok(obs)
    }

    pub fn observation(&mut self) -> Option<Observation> {
        let world = self.world.as_ref()?;
        Some(observe(world, &self.obs_config, &mut self.obs_rng))
    }

    pub fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        if self.world.is_none() {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let cfg = &self.config;
        let resolved = resolve_action(
            action,
            cfg.robot.steering,
            cfg.robot.action_space,
            self.caps,
        )?;
        let world = self.world.as_mut().expect("checked");
        let before = self.recording.as_ref().map(|_| world.clone());
        let prev_robot = world.robot.entity.position();
        let d_goal_prev = prev_robot.distance(world.goal.position);

        integrate(world, &resolved)?;

        let mut hits = detect_collisions(world);
        if hits.collision() {
            // Leaving the map always crosses a wall first; report the wall.
            hits.out_of_map = false;
        }
        let collided = hits.collision() || hits.out_of_map;
        let d_goal = world.robot.entity.position().distance(world.goal.position);
        let success = !collided && d_goal <= self.params.goal_radius;
        let terminated = collided || success;
        let truncated = !terminated && world.step_index >= world.settings.max_steps;

        let accum = self.accum.as_mut().expect("reset initialises metrics");
        let mut info = accum.update(prev_robot, world, &hits, success, truncated);

        let ctx = step_context(
            world,
            d_goal_prev,
            collided,
            cfg.reward.discomfort_all_entities,
        );
        info.discomfort_dsrnn = dsrnn_discomfort(ctx.surface(), &self.params);
        info.distance_reward = progress_reward(&ctx, &self.params);
        let score = match self.scorer.as_mut() {
            Some(s) => Some(check_score(s.score(world)?)?),
            None => None,
        };
        info.sngnn_reward = score.map(|s| s - 1.0);
        let (mut reward, piece) = match cfg.reward.function {
            RewardKind::Dsrnn => dsrnn_piece(&ctx, &self.params),
            RewardKind::Sngnn => sngnn_piece(&ctx, &self.params, score.expect("checked at reset")),
            RewardKind::Custom => {
                let r = self
                    .custom
                    .as_mut()
                    .expect("checked at reset")
                    .reward(&ctx, world)?;
                (r, RewardPiece::Custom)
            }
        };
        if !terminated {
            info.alive_reward = cfg.reward.alive_reward;
            reward += info.alive_reward;
        }
        info.reward = reward;
        info.reward_piece = piece;
        let ids: Vec<EntityId> = world
            .humans
            .iter()
            .map(|h| h.entity.id)
            .chain(world.objects.iter().map(|o| o.id))
            .collect();
        info.interactions = relationships(world, &ids);

        let observation = observe(world, &self.obs_config, &mut self.obs_rng);
        self.done = terminated || truncated;
        self.actions.push(*action);
        self.infos.push(info.clone());
        if let (Some(rec), Some(state)) = (self.recording.as_mut(), before) {
            rec.steps.push(RecordedStep {
                state,
                action: *action,
                reward,
                next_state: world.clone(),
                info: info.clone(),
                terminated,
                truncated,
            });
        }
        Ok(StepResult {
            observation,
            reward,
            terminated,
            truncated,
            info,
        })
    }

    /// Summary of the current episode, once at least one step was taken.
    pub fn summary(&self) -> Option<EpisodeSummary> {
        let accum = self.accum.as_ref()?;
        (!self.infos.is_empty())
            .then(|| finalize(&self.infos, accum.shortest_path, self.caps.v_max, accum.dt))
    }

    fn new_record(&self) -> EpisodeRecord {
        EpisodeRecord {
            header: RecordHeader {
                format_version: String::from(FORMAT_VERSION),
                seed: self.seed,
                rng: String::from(RNG_ALGORITHM),
                config: self.config.clone(),
                prefix: self.actions.clone(),
            },
            steps: Vec::new(),
        }
    }

    /// Starts capturing steps; later resets start a fresh record.
    pub fn start_recording(&mut self) {
        if self.recording.is_none() {
            self.recording = Some(self.new_record());
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    /// Stops capturing and hands back what was recorded.
    pub fn stop_recording(&mut self) -> Option<EpisodeRecord> {
        self.recording.take()
    }
}

/// The reward an info claims, rebuilt from its logged terms.
pub fn recompose_reward(
    info: &StepInfo,
    function: RewardKind,
    params: &RewardParams,
) -> Option<f64> {
    let base = match (function, info.reward_piece) {
        (_, RewardPiece::Collision) => -1.0,
        (_, RewardPiece::Goal) => 1.0,
        (RewardKind::Dsrnn, RewardPiece::Discomfort) => info.discomfort_dsrnn,
        (RewardKind::Dsrnn, RewardPiece::Progress) => info.distance_reward,
        (RewardKind::Sngnn, RewardPiece::Progress) => {
            info.distance_reward + info.sngnn_reward? * params.delta
        }
        _ => return None,
    };
    Some(base + info.alive_reward)
}

/// Re-simulates `record` in `env` and compares every logged step.
pub fn replay_with(env: &mut Env, record: &EpisodeRecord) -> Result<ReplayReport, ReplayError> {
    if record.header.format_version != FORMAT_VERSION {
        return Err(ReplayError::FormatVersion {
            found: record.header.format_version.clone(),
        });
    }
    if record.header.rng != RNG_ALGORITHM {
        return Err(ReplayError::RngAlgorithm(record.header.rng.clone()));
    }
    env.reset(record.header.seed)?;
    for a in &record.header.prefix {
        env.step(a)?;
    }
    for (i, logged) in record.steps.iter().enumerate() {
        let diverged = |n: usize| {
            Ok(ReplayReport {
                steps_checked: n,
                first_divergence: Some(n),
            })
        };
        if !env.world().is_some_and(|w| w.same_state(&logged.state)) {
            return diverged(i);
        }
        let Ok(out) = env.step(&logged.action) else {
            return diverged(i);
        };
        let same = out.reward.to_bits() == logged.reward.to_bits()
            && out.terminated == logged.terminated
            && out.truncated == logged.truncated
            && out.info == logged.info
            && env
                .world()
                .is_some_and(|w| w.same_state(&logged.next_state));
        if !same {
            return diverged(i);
        }
    }
    Ok(ReplayReport {
        steps_checked: record.steps.len(),
        first_divergence: None,
    })
}

/// Re-simulates `record` with a fresh environment built from its header.
pub fn replay(record: &EpisodeRecord) -> Result<ReplayReport, ReplayError> {
    let mut env = Env::new(record.header.config.clone())?;
    replay_with(&mut env, record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, ActionSpace, Steering};
    use crate::error::ActionError;
    use crate::observe::OBSERVATION_KEYS;

    fn stop() -> Action {
        Action::Discrete { index: 0 }
    }

    #[test]
    fn reset_is_deterministic_and_counts_preset_one() {
        let mut a = Env::new(preset(1).unwrap()).unwrap();
        let mut b = Env::new(preset(1).unwrap()).unwrap();
        let (oa, ob) = (a.reset(7).unwrap(), b.reset(7).unwrap());
        assert_eq!(oa, ob);
        assert_eq!((oa.humans.len(), oa.objects.len()), (1, 1));
        let _ = OBSERVATION_KEYS;
    }

    #[test]
    fn timeout_after_two_hundred_stops() {
        let mut env = Env::new(preset(1).unwrap()).unwrap();
        env.reset(3).unwrap();
        let mut last = None;
        for i in 0..200 {
            let r = env.step(&stop()).unwrap();
            if r.terminated {
                // A wandering human walked into the parked robot.
                return assert!(r.info.collision_human, "terminated early at {i}");
            }
            assert_eq!(r.truncated, i == 199);
            last = Some(r);
        }
        let r = last.unwrap();
        assert!(r.truncated && r.info.timeout && !r.terminated);
        assert_eq!(env.step(&stop()), Err(EnvError::EpisodeOver));
    }

    #[test]
    fn step_before_reset_and_space_mismatch() {
        let mut env = Env::new(preset(1).unwrap()).unwrap();
        assert_eq!(env.step(&stop()), Err(EnvError::NotReset));
        env.reset(0).unwrap();
        let err = env
            .step(&Action::ContinuousNonHolonomic { v: 0.1, omega: 0.0 })
            .unwrap_err();
        assert!(matches!(
            err,
            EnvError::Action(ActionError::SpaceMismatch(..))
        ));
        assert!(matches!(
            env.step(&Action::Discrete { index: 99 }),
            Err(EnvError::Action(_))
        ));
    }

    #[test]
    fn goal_reached_terminates_with_one() {
        let mut cfg = crate::config::ScenarioConfig::default();
        cfg.robot.steering = Steering::Holonomic;
        cfg.robot.action_space = ActionSpace::Continuous;
        let mut env = Env::new(cfg).unwrap();
        env.reset(5).unwrap();
        for _ in 0..400 {
            let w = env.world().unwrap();
            let to = w.goal.position - w.robot.entity.position();
            let v = to.normalize_or_zero() * to.length().min(1.0) * 0.999;
            let r = env
                .step(&Action::ContinuousHolonomic {
                    vx: v.x,
                    vy: v.y,
                    omega: 0.0,
                })
                .unwrap();
            if r.terminated {
                assert!(r.info.success && !r.info.collision);
                assert_eq!(r.reward, 1.0);
                let s = env.summary().unwrap();
                assert!(s.spl > 0.99, "{}", s.spl);
                return;
            }
        }
        panic!("never reached the goal");
    }

    #[test]
    fn record_replay_and_tamper() {
        let mut env = Env::new(preset(3).unwrap()).unwrap();
        env.start_recording();
        env.reset(11).unwrap();
        for i in 0..10 {
            if env
                .step(&Action::Discrete { index: 1 + i % 6 })
                .unwrap()
                .terminated
            {
                break;
            }
        }
        let record = env.stop_recording().unwrap();
        assert!(!record.steps.is_empty());
        assert_eq!(
            replay(&record).unwrap(),
            ReplayReport {
                steps_checked: record.steps.len(),
                first_divergence: None
            }
        );

        let mut tampered = record.clone();
        let k = tampered.steps.len() / 2;
        tampered.steps[k].action = Action::Discrete { index: 3 };
        if tampered.steps[k].action != record.steps[k].action {
            assert_eq!(replay(&tampered).unwrap().first_divergence, Some(k));
        }

        let empty = EpisodeRecord {
            steps: Vec::new(),
            ..record.clone()
        };
        assert!(replay(&empty).unwrap().verified());

        let mut wrong = record;
        wrong.header.format_version = String::from("other/9");
        assert!(matches!(
            replay(&wrong),
            Err(ReplayError::FormatVersion { .. })
        ));
    }

    #[test]
    fn recording_started_mid_episode_replays() {
        let mut env = Env::new(preset(2).unwrap()).unwrap();
        env.reset(4).unwrap();
        for _ in 0..3 {
            env.step(&Action::Discrete { index: 3 }).unwrap();
        }
        env.start_recording();
        for _ in 0..5 {
            env.step(&Action::Discrete { index: 2 }).unwrap();
        }
        let record = env.stop_recording().unwrap();
        assert_eq!(record.header.prefix.len(), 3);
        assert!(replay(&record).unwrap().verified());
    }

    #[test]
    fn rewards_recompose() {
        for function in [RewardKind::Dsrnn, RewardKind::Sngnn] {
            let mut cfg = preset(2).unwrap();
            cfg.reward.function = function;
            cfg.reward.alive_reward = -0.01;
            let params = RewardParams::from(&cfg);
            let mut env = Env::new(cfg).unwrap();
            let mut rng = Rng::seed_from_u64(1);
            for ep in 0..5 {
                env.reset(ep).unwrap();
                loop {
                    let r = env
                        .step(&Action::Discrete {
                            index: rng.index(7),
                        })
                        .unwrap();
                    let again = recompose_reward(&r.info, function, &params).unwrap();
                    assert!((again - r.reward).abs() < 1e-9);
                    if r.terminated {
                        let flags = [r.info.success, r.info.collision, r.info.out_of_map];
                        assert_eq!(flags.iter().filter(|&&f| f).count(), 1);
                    }
                    assert!(!(r.terminated && r.truncated));
                    if r.terminated || r.truncated {
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn custom_reward_requires_installation() {
        struct Constant;
        impl RewardFunction for Constant {
            fn reward(
                &mut self,
                _: &crate::reward::StepContext,
                _: &World,
            ) -> Result<f64, ScorerError> {
                Ok(0.25)
            }
        }
        let mut cfg = preset(1).unwrap();
        cfg.reward.function = RewardKind::Custom;
        let mut env = Env::new(cfg).unwrap();
        assert_eq!(env.reset(0), Err(EnvError::MissingCustomReward));
        env.set_custom_reward(Box::new(Constant));
        env.reset(0).unwrap();
        assert_eq!(env.step(&stop()).unwrap().reward, 0.25);
    }
}
