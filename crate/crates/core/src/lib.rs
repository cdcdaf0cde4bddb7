//! Stochastic microgrid sizing: scenario generation, hourly dispatch,
//! life-cycle costing with policy incentives, and mixed-variable optimizers.

pub mod case;
pub mod cli;
pub mod components;
pub mod config;
pub mod dispatch;
pub mod economics;
pub mod error;
pub mod objective;
pub mod optimize;
pub mod rng;
pub mod scenario;

pub use error::ModelError;
