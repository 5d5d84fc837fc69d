use std::fmt;

use serde::Serialize;
use thiserror::Error;
use windflex_core::reserve::ReserveError;
use windflex_core::stressor::StressorError;
use windflex_core::weather::WeatherError;
use windflex_sched::{SchedError, SolverError};

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Fit,
    Stress,
    Size,
    Scuc,
    Rt,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Fit => "fit",
            Stage::Stress => "stress",
            Stage::Size => "size",
            Stage::Scuc => "scuc",
            Stage::Rt => "rt",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Cause {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error(transparent)]
    Stressor(#[from] StressorError),
    #[error(transparent)]
    Reserve(#[from] ReserveError),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

#[derive(Debug, Error)]
#[error("[{stage}] {cause}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub cause: Cause,
}

impl PipelineError {
    pub fn new(stage: Stage, cause: impl Into<Cause>) -> Self {
        Self {
            stage,
            cause: cause.into(),
        }
    }

    pub fn invalid(stage: Stage, msg: impl Into<String>) -> Self {
        Self::new(stage, Cause::Invalid(msg.into()))
    }

    fn solver(&self) -> Option<&SolverError> {
        match &self.cause {
            Cause::Solver(e) | Cause::Sched(SchedError::Solver(e)) => Some(e),
            _ => None,
        }
    }

    /// 2 validation, 3 solver failure, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self.solver() {
            Some(SolverError::Infeasible { .. }) => 4,
            Some(SolverError::UnknownBackend(_)) => 2,
            Some(_) => 3,
            None => 2,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Tags an error with the stage it came from.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<Cause>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}
