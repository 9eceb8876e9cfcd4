//! Simulator and learning stack for cooperative UAV / ground-station edge
//! computing in support of unmanned surface vehicles.

pub mod autodiff;
pub mod channel;
pub mod env;
pub mod error;
pub mod experiments;
pub mod nets;
pub mod rng;
pub mod trainer;
pub mod workload;
pub mod world;

pub use error::{Error, Result};
