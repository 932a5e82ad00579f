// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::Command;

use cmor_cli::config::Write;
use cmor_cli::{load_config, run, save_config, Experiment, RunConfig};
use cmor_core::{Address, CmorError, LabeledDataset, ProgrammingPlan};

fn cmor() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmor"))
}

#[test]
fn saved_config_loads_back_equal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.txt");
    fs::write(&data, LabeledDataset::xor_task(8, 5, 7).unwrap().to_text()).unwrap();
    let mut config = RunConfig {
        experiment: Experiment::Ttest,
        rule: 90,
        g_b: 1.1e-3,
        program: vec![
            Write {
                address: Address::new(2, 7),
                level: 1,
            },
            Write {
                address: Address::new(4, 7),
                level: 2,
            },
        ],
        bit_pair: Some((1, 3)),
        fixed_bits: Some(vec![true, false, true, true, false, false]),
        dataset: Some(data),
        output: dir.path().join("artifacts"),
        ..RunConfig::default()
    };
    config.device.levels = vec![1e-6, 1.5e-3, 1.56e-3];
    config.device.lrs_sigma = 0.002;
    config.device.seed = 99;
    config.hinge.epochs = 123;
    let path = dir.path().join("run.txt");
    save_config(&config, &path).unwrap();
    assert_eq!(load_config(&path).unwrap(), config);
}

#[test]
fn dataset_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("sub")).unwrap();
    fs::write(dir.path().join("sub/d.txt"), "0011 +1\n1100 -1\n").unwrap();
    fs::write(
        dir.path().join("sub/run.txt"),
        "experiment=train\nn=4\nm=3\ndataset=d.txt\n",
    )
    .unwrap();
    let c = load_config(&dir.path().join("sub/run.txt")).unwrap();
    assert_eq!(c.dataset.unwrap(), dir.path().join("sub/d.txt"));
    fs::write(dir.path().join("run.txt"), "dataset=d.txt\n").unwrap();
    let err = load_config(&dir.path().join("run.txt")).unwrap_err();
    assert!(matches!(err, CmorError::InvalidValue { ref key, .. } if key == "dataset"));
}

#[test]
fn verify_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&RunConfig::default(), dir.path()).unwrap();
    assert_eq!(outcome.summary, "verify rule=60 PASS 256/256 inputs");
    assert!(outcome.passed);
    let report = fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(report.contains("PASS 256/256 inputs"));
}

#[test]
fn sweep_run_finds_two_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        experiment: Experiment::Sweep,
        program: vec![Write {
            address: Address::new(2, 7),
            level: 1,
        }],
        ..RunConfig::default()
    };
    let outcome = run(&config, dir.path()).unwrap();
    assert_eq!(outcome.summary, "sweep rule=60 clusters=2 mirror=PASS");
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("input,g_sigma_siemens,class,enabled_a"));
    assert_eq!(csv.lines().count(), 257);
    let bank = fs::read_to_string(dir.path().join("bank.txt")).unwrap();
    assert_eq!(
        cmor_core::CrossbarBank::from_text(&bank)
            .unwrap()
            .programmed()
            .count(),
        1
    );
}

#[test]
fn train_run_writes_a_replayable_plan() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        experiment: Experiment::Train,
        ..RunConfig::default()
    };
    let outcome = run(&config, dir.path()).unwrap();
    assert_eq!(outcome.summary, "train rule=60 accuracy=1.0000 writes=1");
    let plan: ProgrammingPlan = fs::read_to_string(dir.path().join("plan.txt"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(plan.writes.len(), 1);
    assert_eq!(plan.writes[0].address, Address::new(2, 7));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = cmor()
        .args(["xor", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert_eq!(
        String::from_utf8_lossy(&ok.stdout).trim(),
        "xor rule=60 element=(2,7) pair=(5,7) xor=PASS"
    );

    // Two programmed devices: the table is no longer XOR.
    let cfg = dir.path().join("two.txt");
    fs::write(&cfg, "program=2:7:1,4:7:1\n").unwrap();
    let fail = cmor()
        .args(["xor", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("y"))
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "rule=300\n").unwrap();
    let err = cmor()
        .args(["verify", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("rule"));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = cmor()
        .args([
            "sweep",
            "--rule",
            "90",
            "--seed",
            "5",
            "--gb",
            "2e-3",
            "--lrs",
            "1e-3",
            "--parasitic",
            "0",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let echoed = load_config(&out.join("config.txt")).unwrap();
    assert_eq!(echoed.rule, 90);
    assert_eq!(echoed.device.seed, 5);
    assert_eq!(echoed.g_b, 2e-3);
    assert_eq!(echoed.device.lrs_nominal, 1e-3);
    assert_eq!(echoed.device.parasitic_enabled, 0.0);
    assert_eq!(echoed.output, out);
}

#[test]
fn only_addresses_in_use_are_checked() {
    let c =
        RunConfig::parse("experiment=ttest\nn=4\nm=3\n", std::path::Path::new(".")).unwrap_err();
    assert!(matches!(c, CmorError::InvalidValue { ref key, .. } if key == "ttest_a"));
    assert!(RunConfig::parse("experiment=verify\nn=4\nm=3\n", std::path::Path::new(".")).is_ok());
}
