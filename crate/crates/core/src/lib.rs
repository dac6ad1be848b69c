pub mod domain;
pub mod envs;
pub mod maxent;
pub mod sampling;
pub mod agents;
pub mod harness;
pub mod error;
pub mod seed;

pub use error::{Error, Result};
