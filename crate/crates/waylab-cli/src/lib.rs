//! Scenario files, built-in scenarios, report emission and the acceptance
//! battery behind the `waylab` binary.

pub mod builtin;
pub mod descriptor;
pub mod error;
pub mod output;
pub mod scenario;
pub mod suite;

pub use error::{CliError, CliResult};
pub use scenario::{run_scenario, Scenario, ScenarioReport};

/// Version of the scenario and report schema.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the default `eq_tol`.
pub const TOL_ENV: &str = "WAYLAB_TOL";
