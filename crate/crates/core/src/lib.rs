//! Weather-driven probabilistic wind power scenarios and flexibility reserve sizing.
//!
//! The crate is organised along the data flow of a reserve study:
//!
//! - [`weather`]: loading, validating, standardizing and clustering weather feature tables.
//! - [`turbine`]: air density, rotor-equivalent wind speed and the wake-adjusted power curve.
//! - [`stats`]: parametric error distributions, maximum-likelihood fitting and model selection.
//! - [`stressor`]: transition matrices, error sampling, PCA feature coupling and scenario sets.
//! - [`reserve`]: extent-, probability- and risk-based reserve requirements and aggregation.
//! - [`synthetic`]: reproducible synthetic weather data for examples and tests.

pub mod reserve;
pub mod rng;
pub mod stats;
pub mod stressor;
pub mod synthetic;
pub mod turbine;
pub mod weather;

pub use reserve::{ReserveMethod, ReserveSchedule};
pub use stressor::{ScenarioSet, TransitionModel};
pub use turbine::{Region, TurbineSpec};
pub use weather::{FeatureTable, StandardizedTable};
