use socnav_core::env::ReplayError;
use socnav_core::error::{EnvError, ScorerError};
use thiserror::Error;

use crate::config::ConfigError;
use crate::log::LogError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replay diverged at step {step} of {checked}")]
    Diverged { step: usize, checked: usize },
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("websocket: {0}")]
    Socket(#[from] tungstenite::Error),
}

impl RunError {
    /// Process exit code: 1 usage, 2 config, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Config(_) => 2,
            RunError::Env(EnvError::Scenario(socnav_core::ScenarioError::InvalidConfig(_))) => 2,
            _ => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunError {
        let context = context.into();
        move |source| RunError::Io { context, source }
    }
}

impl From<socnav_core::ScenarioError> for RunError {
    fn from(e: socnav_core::ScenarioError) -> Self {
        RunError::Env(EnvError::Scenario(e))
    }
}
