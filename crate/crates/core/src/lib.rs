//! Simulation, dataset construction and neural attribution of user-caused
//! impairments on a shared optical line system sold as spectrum windows.

pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod physics;
pub mod pipeline;
pub mod posenc;
pub mod scenarios;
pub mod seed;
pub mod topology;
pub mod train;

pub use error::{Error, Result};
