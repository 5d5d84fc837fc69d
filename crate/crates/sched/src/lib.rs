//! Day-ahead unit commitment with flexibility reserve and real-time redispatch.
//!
//! [`build_scuc`] turns a [`GridCase`] and per-entity reserve schedules into a
//! mixed-integer model under one of four reserve policies; [`build_rt_dispatch`]
//! re-dispatches the resulting commitment against realized wind and load.
//! Both produce solver-neutral [`LinearModel`]s solved through a [`SolverBackend`].

pub mod case;
pub mod lp;
mod network;
pub mod rt;
pub mod scuc;

use thiserror::Error;

pub use case::GridCase;
pub use lp::{backend, HighsBackend, LinearModel, SolveLimits, SolverBackend, SolverError};
pub use rt::{build_rt_dispatch, extract_redispatch, redispatch_split, Redispatch, RtCosts, RtModel, RtPenalties, RtSolution};
pub use scuc::{
    build_scuc, ContingencyRule, DaCosts, DaSolution, RampForm, ReserveNetwork, ReservePolicy, ScucModel, ScucOptions, SYSTEM_ENTITY,
};

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("invalid grid case: {0}")]
    InvalidCase(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("reserve: {0}")]
    Reserve(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("case parse error: {0}")]
    TomlDe(#[from] toml::de::Error),
    #[error("case write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
