// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cmor_cli::{load_config, run, Experiment, RunConfig};

#[derive(Parser)]
#[command(
    name = "cmor",
    version,
    about = "ECA reservoir with a ReRAM crossbar readout"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the stepper against the rule table for every input.
    Verify(Common),
    /// Read every input through a programmed bank.
    Sweep(Common),
    /// Drive an input pair through all four combinations.
    Xor(Common),
    /// Compare two programmed levels with a pooled t-test.
    Ttest(Common),
    /// Train a readout and quantize it to a programming plan.
    Train(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rule: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decision threshold in siemens.
    #[arg(long)]
    gb: Option<f64>,
    /// Nominal LRS conductance in siemens.
    #[arg(long)]
    lrs: Option<f64>,
    /// Conductance of an enabled unformed device, in siemens.
    #[arg(long)]
    parasitic: Option<f64>,
}

fn build(experiment: Experiment, args: Common) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    config.experiment = experiment;
    if let Some(v) = args.rule {
        config.rule = v;
    }
    if let Some(v) = args.seed {
        config.device.seed = v;
    }
    if let Some(v) = args.gb {
        config.g_b = v;
    }
    if let Some(v) = args.lrs {
        config.device.lrs_nominal = v;
    }
    if let Some(v) = args.parasitic {
        config.device.parasitic_enabled = v;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Verify(a) => (Experiment::Verify, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::Xor(a) => (Experiment::Xor, a),
        Command::Ttest(a) => (Experiment::Ttest, a),
        Command::Train(a) => (Experiment::Train, a),
    };
    let result = build(experiment, args).and_then(|config| {
        let out = config.output.clone();
        run(&config, &out).with_context(|| format!("{experiment} failed"))
    });
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
