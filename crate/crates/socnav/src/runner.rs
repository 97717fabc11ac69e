//! Episode drivers: environment construction, built-in policies, batch runs,
//! recording and the throughput benchmark.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use socnav_core::config::{ActionSpace, Steering};
use socnav_core::dynamics::{
    action_table_size, apply_robot_action, decode_discrete, detect_collisions, integrate,
    resolve_action, SpeedCaps,
};
use socnav_core::env::{replay_with, EpisodeRecord, ReplayReport};
use socnav_core::geometry::normalize_angle;
use socnav_core::metrics::{aggregate, EpisodeSummary, MetricsAccumulator, RunAggregate};
use socnav_core::observe::{observe, ObservationConfig};
use socnav_core::reward::{dsrnn_reward, step_context, surrogate_score, RewardParams};
use socnav_core::scenario::generate;
use socnav_core::{Action, Env, Rng, ScenarioConfig, World};

use crate::error::RunError;
use crate::log::{read_record, write_record};
use crate::scorer::load_scorer;

/// Stream index of the random policy's generator.
const POLICY_STREAM: u64 = 2;

/// Heading error below which the straight-to-goal controller drives (rad).
const ALIGNED: f64 = 1e-6;

/// Environment with the scorer named in the config installed, including
/// scorers that need IO.
pub fn make_env(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Env, RunError> {
    let descriptor = config.reward.scorer.clone();
    let mut env = Env::new(config)?;
    if descriptor.starts_with("file:") || descriptor.starts_with("process:") {
        env.set_scorer(load_scorer(&descriptor, base_dir)?);
    }
    Ok(env)
}

/// Re-simulates a record with its header config and scorer.
pub fn replay_record(
    record: &EpisodeRecord,
    base_dir: Option<&Path>,
) -> Result<ReplayReport, RunError> {
    let mut env = make_env(record.header.config.clone(), base_dir)?;
    Ok(replay_with(&mut env, record)?)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Random,
    StraightToGoal,
    /// Actions of a logged episode, followed by stop actions.
    Replay(PathBuf),
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(PolicySpec::Random),
            "straight-to-goal" => Ok(PolicySpec::StraightToGoal),
            _ => match s.strip_prefix("replay:") {
                Some(p) if !p.is_empty() => Ok(PolicySpec::Replay(PathBuf::from(p))),
                _ => Err(format!(
                    "unknown policy `{s}`; use random, straight-to-goal or replay:<log>"
                )),
            },
        }
    }
}

pub enum Policy {
    Random(Rng),
    StraightToGoal,
    Replay { actions: Vec<Action>, next: usize },
}

impl Policy {
    /// Policy instance for the episode with `seed`. Replay actions are read
    /// once by the caller and shared.
    pub fn new(spec: &PolicySpec, seed: u64, replay: &[Action]) -> Policy {
        match spec {
            PolicySpec::Random => Policy::Random(Rng::derive(seed, POLICY_STREAM)),
            PolicySpec::StraightToGoal => Policy::StraightToGoal,
            PolicySpec::Replay(_) => Policy::Replay {
                actions: replay.to_vec(),
                next: 0,
            },
        }
    }

    pub fn act(&mut self, world: &World, config: &ScenarioConfig) -> Action {
        let steering = config.robot.steering;
        let space = config.robot.action_space;
        let caps = SpeedCaps {
            v_max: config.robot.max_speed,
            omega_max: config.robot.max_angular_speed,
        };
        match self {
            Policy::Random(rng) => random_action(rng, steering, space, caps),
            Policy::StraightToGoal => straight_to_goal(world, steering, space, caps),
            Policy::Replay { actions, next } => {
                let a = actions
                    .get(*next)
                    .copied()
                    .unwrap_or_else(|| stop_action(steering, space));
                *next += 1;
                a
            }
        }
    }
}

pub fn stop_action(steering: Steering, space: ActionSpace) -> Action {
    match (space, steering) {
        (ActionSpace::Discrete, _) => Action::Discrete { index: 0 },
        (ActionSpace::Continuous, Steering::NonHolonomic) => Action::STOP_NON_HOLONOMIC,
        (ActionSpace::Continuous, Steering::Holonomic) => Action::ContinuousHolonomic {
            vx: 0.0,
            vy: 0.0,
            omega: 0.0,
        },
    }
}

pub fn random_action(
    rng: &mut Rng,
    steering: Steering,
    space: ActionSpace,
    caps: SpeedCaps,
) -> Action {
    match (space, steering) {
        (ActionSpace::Discrete, s) => Action::Discrete {
            index: rng.index(action_table_size(s)),
        },
        (ActionSpace::Continuous, Steering::NonHolonomic) => Action::ContinuousNonHolonomic {
            v: rng.range(0.0, caps.v_max),
            omega: rng.range(-caps.omega_max, caps.omega_max),
        },
        (ActionSpace::Continuous, Steering::Holonomic) => {
            let heading = rng.range(-std::f64::consts::PI, std::f64::consts::PI);
            let speed = rng.range(0.0, caps.v_max);
            Action::ContinuousHolonomic {
                vx: speed * heading.cos(),
                vy: speed * heading.sin(),
                omega: 0.0,
            }
        }
    }
}

/// Turn towards the goal, then drive at it; ignores everything else.
pub fn straight_to_goal(
    world: &World,
    steering: Steering,
    space: ActionSpace,
    caps: SpeedCaps,
) -> Action {
    let robot = world.robot.entity.pose;
    let dt = world.settings.dt;
    let to_goal = world.goal.position - robot.position();
    let dist = to_goal.length();
    match (space, steering) {
        (ActionSpace::Continuous, Steering::Holonomic) => {
            let v = to_goal.normalize_or_zero() * caps.v_max.min(dist / dt);
            Action::ContinuousHolonomic {
                vx: v.x,
                vy: v.y,
                omega: 0.0,
            }
        }
        (ActionSpace::Continuous, Steering::NonHolonomic) => {
            let err = normalize_angle(to_goal.angle() - robot.theta).unwrap_or(0.0);
            let omega = (err / dt).clamp(-caps.omega_max, caps.omega_max);
            let v = if err.abs() <= ALIGNED {
                caps.v_max.min(dist / dt)
            } else {
                0.0
            };
            Action::ContinuousNonHolonomic { v, omega }
        }
        (ActionSpace::Discrete, Steering::NonHolonomic) => {
            let err = normalize_angle(to_goal.angle() - robot.theta).unwrap_or(0.0);
            let half_turn = caps.omega_max * dt / 2.0;
            let index = if err > half_turn {
                3
            } else if err < -half_turn {
                4
            } else {
                1
            };
            Action::Discrete { index }
        }
        (ActionSpace::Discrete, Steering::Holonomic) => {
            let best = (0..action_table_size(steering))
                .map(|i| {
                    let cont = decode_discrete(i, steering, caps).expect("index in range");
                    let next = apply_robot_action(robot, &cont, dt).position();
                    (next.distance(world.goal.position), i)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map_or(0, |(_, i)| i);
            Action::Discrete { index: best }
        }
    }
}

/// Actions a log replays: the prefix taken before recording, then the
/// recorded steps.
pub fn logged_actions(record: &EpisodeRecord) -> Vec<Action> {
    record
        .header
        .prefix
        .iter()
        .copied()
        .chain(record.steps.iter().map(|s| s.action))
        .collect()
}

pub fn load_log(path: &Path) -> Result<(EpisodeRecord, Option<EpisodeSummary>), RunError> {
    let file = File::open(path).map_err(RunError::io(format!("cannot open {}", path.display())))?;
    Ok(read_record(BufReader::new(file))?)
}

pub fn save_log(
    path: &Path,
    record: &EpisodeRecord,
    summary: Option<&EpisodeSummary>,
) -> Result<(), RunError> {
    let file =
        File::create(path).map_err(RunError::io(format!("cannot create {}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_record(&mut w, record, summary)?;
    w.flush()
        .map_err(RunError::io(format!("cannot write {}", path.display())))?;
    Ok(())
}

/// Runs one recorded episode from reset to its end.
pub fn run_episode(
    env: &mut Env,
    policy: &mut Policy,
    seed: u64,
) -> Result<(EpisodeRecord, EpisodeSummary), RunError> {
    env.reset(seed)?;
    env.start_recording();
    loop {
        let world = env.world().expect("reset");
        let action = policy.act(world, env.config());
        let out = env.step(&action)?;
        if out.terminated || out.truncated {
            break;
        }
    }
    let record = env.stop_recording().expect("recording started");
    let summary = env.summary().expect("at least one step");
    Ok((record, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub aggregate: RunAggregate,
    pub seeds: Vec<u64>,
    pub summaries: Vec<EpisodeSummary>,
}

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub episodes: usize,
    pub seed: u64,
    pub policy: PolicySpec,
    /// Directory receiving one log per episode and `aggregate.json`.
    pub out: Option<PathBuf>,
    pub base_dir: Option<PathBuf>,
}

/// Episode `i` uses seed `seed + i`; episodes run in parallel, one
/// environment each.
pub fn run_batch(
    config: &ScenarioConfig,
    opts: &BatchOptions,
) -> Result<(BatchReport, Vec<EpisodeRecord>), RunError> {
    if opts.episodes == 0 {
        return Err(RunError::Usage(String::from(
            "--episodes must be at least 1",
        )));
    }
    let replay = match &opts.policy {
        PolicySpec::Replay(path) => logged_actions(&load_log(path)?.0),
        _ => Vec::new(),
    };
    let base_dir = opts.base_dir.as_deref();
    let seeds: Vec<u64> = (0..opts.episodes as u64)
        .map(|i| opts.seed.wrapping_add(i))
        .collect();
    let results: Vec<(EpisodeRecord, EpisodeSummary)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut env = make_env(config.clone(), base_dir)?;
            let mut policy = Policy::new(&opts.policy, seed, &replay);
            run_episode(&mut env, &mut policy, seed)
        })
        .collect::<Result<_, RunError>>()?;
    let (records, summaries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = BatchReport {
        aggregate: aggregate(&summaries),
        seeds,
        summaries,
    };
    if let Some(dir) = &opts.out {
        std::fs::create_dir_all(dir)
            .map_err(RunError::io(format!("cannot create {}", dir.display())))?;
        for (i, (rec, s)) in records.iter().zip(&report.summaries).enumerate() {
            save_log(&dir.join(format!("episode_{i:05}.ndjson")), rec, Some(s))?;
        }
        let path = dir.join("aggregate.json");
        let text = serde_json::to_string_pretty(&report.aggregate).expect("aggregate serializes");
        std::fs::write(&path, text + "\n")
            .map_err(RunError::io(format!("cannot write {}", path.display())))?;
    }
    Ok((report, records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub steps: u64,
    pub episodes: u64,
    pub seconds: f64,
    pub steps_per_second: f64,
    /// Seconds spent per phase in a second, instrumented pass.
    pub phases: BTreeMap<String, f64>,
}

/// Headless random-policy stepping of `config`.
pub fn bench(config: &ScenarioConfig, steps: u64, seed: u64) -> Result<BenchReport, RunError> {
    if steps == 0 {
        return Err(RunError::Usage(String::from("--steps must be at least 1")));
    }
    let mut env = make_env(config.clone(), None)?;
    let mut policy = Policy::new(&PolicySpec::Random, seed, &[]);
    let mut episodes = 1;
    let mut episode_seed = seed;
    env.reset(episode_seed)?;
    let start = Instant::now();
    for _ in 0..steps {
        let action = policy.act(env.world().expect("reset"), env.config());
        let out = env.step(&action)?;
        if out.terminated || out.truncated {
            episode_seed = episode_seed.wrapping_add(1);
            env.reset(episode_seed)?;
            episodes += 1;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(BenchReport {
        steps,
        episodes,
        seconds,
        steps_per_second: steps as f64 / seconds.max(f64::MIN_POSITIVE),
        phases: phase_breakdown(config, steps, seed)?,
    })
}

/// Runs the stages of a step one by one under a clock.
fn phase_breakdown(
    config: &ScenarioConfig,
    steps: u64,
    seed: u64,
) -> Result<BTreeMap<String, f64>, RunError> {
    let names = [
        "reset",
        "action",
        "crowd_and_robot",
        "collisions",
        "reward",
        "observation",
        "metrics",
    ];
    let mut spent = [0.0f64; 7];
    let mut clock = Instant::now();
    let mut lap = |i: usize| {
        let now = Instant::now();
        spent[i] += (now - clock).as_secs_f64();
        clock = now;
    };
    let obs_cfg = ObservationConfig::from(config);
    let params = RewardParams::from(config);
    let caps = SpeedCaps {
        v_max: config.robot.max_speed,
        omega_max: config.robot.max_angular_speed,
    };
    let mut rng = Rng::derive(seed, POLICY_STREAM);
    let mut obs_rng = Rng::derive(seed, 1);
    let mut episode_seed = seed;
    let mut cfg = config.clone().with_seed(episode_seed);
    let mut world = generate(&cfg)?;
    let mut accum = MetricsAccumulator::new(&world, caps.v_max);
    lap(0);
    for _ in 0..steps {
        let action = random_action(&mut rng, cfg.robot.steering, cfg.robot.action_space, caps);
        let resolved = resolve_action(&action, cfg.robot.steering, cfg.robot.action_space, caps)
            .map_err(socnav_core::EnvError::from)?;
        let prev = world.robot.entity.position();
        let d_prev = prev.distance(world.goal.position);
        lap(1);
        integrate(&mut world, &resolved)?;
        lap(2);
        let hits = detect_collisions(&world);
        lap(3);
        let collided = hits.collision() || hits.out_of_map;
        let ctx = step_context(&world, d_prev, collided, cfg.reward.discomfort_all_entities);
        std::hint::black_box((dsrnn_reward(&ctx, &params), surrogate_score(&world)));
        lap(4);
        std::hint::black_box(observe(&world, &obs_cfg, &mut obs_rng));
        lap(5);
        let success = !collided && ctx.d_goal <= params.goal_radius;
        let timeout = world.step_index >= world.settings.max_steps;
        accum.update(prev, &world, &hits, success, timeout);
        lap(6);
        if collided || success || timeout {
            episode_seed = episode_seed.wrapping_add(1);
            cfg = cfg.with_seed(episode_seed);
            world = generate(&cfg)?;
            accum = MetricsAccumulator::new(&world, caps.v_max);
            lap(0);
        }
    }
    Ok(names.iter().map(|n| n.to_string()).zip(spent).collect())
}
