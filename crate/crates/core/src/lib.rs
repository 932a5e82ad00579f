// SPDX-License-Identifier: Apache-2.0

//! Simulation of a cellular-automaton reservoir read out by a ReRAM crossbar.
//!
//! An input of `n` bits seeds an elementary cellular automaton on a ring. The
//! `m` generations it computes gate an `m x n` array of 1T1R devices wired in
//! parallel; the summed conductance compared against a threshold is the
//! classifier output.
//!
//! - [`eca`]: rules, ring lattices, reservoir traces
//! - [`reram`]: device model, crossbar bank, read and classify
//! - [`readout`]: datasets, hinge-loss training, quantization to device levels
//! - [`experiments`]: sweeps, symmetry checks, XOR, level t-test
//! - [`stats`]: Student-t machinery used by the experiments

pub mod eca;
pub mod error;
pub mod experiments;
pub mod readout;
pub mod reram;
pub mod stats;

pub use eca::{run_reservoir, step, Address, LatticeState, ReservoirTrace, Rule, CIRCUIT_RULES};
pub use error::{CmorError, Result};
pub use experiments::{
    level_ttest, mirror_check, sweep, verify_logic, xor_experiment, LevelStats, LogicReport,
    MirrorCheck, SweepResult, XorTable,
};
pub use readout::{
    exhaustive_oracle, featurize, quantize_plan, train_linear, FeatureMatrix, HingeConfig,
    LabeledDataset, LinearModel, ProgrammingPlan,
};
pub use reram::{Class, CrossbarBank, DeviceParams, DeviceState};
