use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::entity::EntityId;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GeometryError {
    #[error("angle is not finite: {0}")]
    NonFiniteAngle(f64),
    #[error("wall endpoints must be distinct and finite")]
    DegenerateWall,
    #[error("wall thickness must be non-negative, got {0}")]
    NegativeThickness(f64),
}

/// One failed constraint in a scenario configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigViolation {
    /// Dotted path of the offending key, e.g. `episode.dt`.
    pub field: String,
    pub message: String,
}

impl core::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error("invalid configuration ({} violation(s))", .0.len())]
    InvalidConfig(Vec<ConfigViolation>),
    #[error("could not place {what} after {attempts} attempts; the scenario is over-constrained")]
    PlacementFailed { what: String, attempts: u32 },
    #[error("no experiment preset {0}; presets are 1, 2 and 3")]
    UnknownPreset(u8),
    #[error("entity {0} does not exist")]
    DanglingId(EntityId),
    #[error("entity {0} is not a {1}")]
    WrongKind(EntityId, &'static str),
    #[error("no matching interaction to disperse")]
    NoSuchInteraction,
    #[error("entity {0} already takes part in an interaction")]
    AlreadyInteracting(EntityId),
    #[error("a crowd needs at least two members, got {0}")]
    CrowdTooSmall(usize),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ActionError {
    #[error("discrete action index {index} out of range (table has {size} entries)")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("{0} action given to an environment configured for {1} actions")]
    SpaceMismatch(&'static str, &'static str),
    #[error("action component {name}={value} exceeds cap {cap}")]
    OverCap {
        name: &'static str,
        value: f64,
        cap: f64,
    },
    #[error("action component {0} is not finite")]
    NonFinite(&'static str),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScorerError {
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
    #[error("scorer handshake failed: {0}")]
    Handshake(String),
    #[error("scorer returned {0}, outside [0, 1]")]
    OutOfRange(f64),
    #[error("scorer failed: {0}")]
    Failed(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EnvError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("reward function `custom` selected but no custom reward was installed")]
    MissingCustomReward,
}
