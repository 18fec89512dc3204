pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod models;
pub mod numkernel;
pub mod pipeline;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
pub use numkernel::Matrix;
