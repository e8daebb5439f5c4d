//! Microgrid energy management: renewable profiles, scenario generation and
//! reduction, day-ahead dispatch with demand response, capacity investment
//! and its worst-case variant.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`.

pub mod config;
pub mod dispatch;
pub mod error;
mod formulation;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod portfolio;
pub(crate) mod qp;
pub mod renewables;
pub mod robust;
pub mod scalar;
pub mod scenarios;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub type Scenario = scenarios::Scenario<f64>;
pub type ScenarioSet = scenarios::ScenarioSet<f64>;
pub type RenewableProfile = renewables::RenewableProfile<f64>;
pub type MeteoSeries = renewables::MeteoSeries<f64>;
pub type UserSpec = model::UserSpec<f64>;
pub type StorageSpec = model::StorageSpec<f64>;
pub type MicrogridSpec = model::MicrogridSpec<f64>;
pub type Capacity = model::Capacity<f64>;
pub type UnitCosts = model::UnitCosts<f64>;
pub type Portfolio = model::Portfolio<f64>;
pub type DispatchSolution = model::DispatchSolution<f64>;
pub type SolverConfig = dispatch::SolverConfig<f64>;
pub type InvestmentSolution = portfolio::InvestmentSolution<f64>;
pub type UncertaintySet = robust::UncertaintySet<f64>;
pub type ErrorBounds = robust::ErrorBounds<f64>;
