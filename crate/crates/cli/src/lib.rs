// SPDX-License-Identifier: Apache-2.0

//! Configuration and experiment runner behind the `cmor` binary.

pub mod config;
pub mod run;

pub use config::{load_config, save_config, Experiment, RunConfig};
pub use run::{run, RunOutcome};
