pub mod baselines;
pub mod bm_fpt;
pub mod cli;
pub mod error;
pub mod exact;
pub mod model;
pub mod neuron;
pub mod numerics;
pub mod parallel;
pub mod problems;
pub mod stats;

pub use error::{FptError, Result};
