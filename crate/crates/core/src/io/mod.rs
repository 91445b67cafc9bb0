//! Configuration, trajectory files and the command drivers behind the CLI.

pub mod commands;
pub mod config;
pub mod store;
pub mod sweep;

pub use commands::{
    cmd_analyze, cmd_report, cmd_run, resolve_output_dir, run_in, RunManifest, RunResult,
    EXIT_CONFIG, EXIT_INCOMPLETE, EXIT_IO, EXIT_MONITOR, EXIT_NUMERICAL, EXIT_OK,
    OUTPUT_ROOT_ENV,
};
pub use config::{load_config, parse_config, RunConfig};
pub use store::{read_trajectory, write_trajectory};
pub use sweep::{cmd_sweep, observed_orders, sweep_in, Axis};
