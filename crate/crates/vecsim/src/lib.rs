//! IO side of the simulator: config files, experiment runner, metric CSVs,
//! fixture generation, checkpoints and the comparison report. All simulation
//! and learning logic lives in `vecsim-core`.

pub mod checkpoint;
pub mod compare;
pub mod config_io;
pub mod fixtures;
pub mod runner;
pub mod trace;

pub use config_io::RunConfig;
