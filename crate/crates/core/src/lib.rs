//! Headless 2D social-navigation simulator: randomised rooms with humans,
//! furniture and social interactions, a robot driven through a reset/step
//! loop, and the rewards and metrics used to evaluate it.
//!
//! The crate is `no_std` (with `alloc`) and free of IO; file formats, the
//! CLI and external scorers live in the `socnav` crate.

#![no_std]

extern crate alloc;

pub mod config;
pub mod crowd;
pub mod dynamics;
pub mod entity;
pub mod env;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod observe;
pub mod reward;
pub mod rng;
pub mod room;
pub mod scenario;

pub use config::{preset, ScenarioConfig};
pub use dynamics::Action;
pub use entity::{Entity, EntityId, EntityKind};
pub use env::{replay, Env, EpisodeRecord, StepResult};
pub use error::{ActionError, ConfigViolation, EnvError, ScenarioError, ScorerError};
pub use geometry::{Pose2D, Vec2, Velocity2D, Wall};
pub use observe::Observation;
pub use rng::Rng;
pub use scenario::World;
