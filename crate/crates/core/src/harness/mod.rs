//! Built-in instances, experiment specs with their artifacts, and the
//! verification sweeps.

pub mod experiment;
pub mod instances;
pub mod verify;

pub use experiment::{run_experiment, ExperimentSpec, RunSummary};
pub use instances::{generate_instance, CATALOG};
pub use verify::{verify_suite, verify_suite_with, VerifyOptions, VerifyReport};
