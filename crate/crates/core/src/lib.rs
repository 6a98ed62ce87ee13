//! Behavioral simulation and benchmarking of off-the-shelf non-volatile
//! memory chips: per-technology device models, characterization
//! experiments, Flip-N-Write encoding, an integer neural network whose
//! parameters live on the simulated memory, and a differential-evolution
//! trainer.

pub mod benchmark;
pub mod characterization;
pub mod cli;
pub mod config;
pub mod de;
pub mod device;
pub mod encoding;
pub mod error;
pub mod nn;
pub mod profile;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
