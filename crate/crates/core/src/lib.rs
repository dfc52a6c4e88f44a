pub mod augment;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod tensor;
pub mod transfer;

pub use error::{HerbError, Result};
