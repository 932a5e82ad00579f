// SPDX-License-Identifier: Apache-2.0

//! Experiment dispatch and artifact writing.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cmor_core::experiments::{sweep_clusters, xor_elements, xor_pairs_for_element};
use cmor_core::{
    featurize, level_ttest, mirror_check, quantize_plan, sweep, train_linear, verify_logic,
    xor_experiment, Address, CrossbarBank, LabeledDataset, MirrorCheck, Result, SweepResult,
};

use crate::config::{Experiment, RunConfig};

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    /// One line: experiment, rule and the key metric.
    pub summary: String,
    /// False when a verification step failed.
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.dir.join(name);
        f(BufWriter::new(File::create(&path)?))?;
        self.written.push(path);
        Ok(())
    }
}

/// Run the configured experiment, writing artifacts into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let mut out = Artifacts::new(out_dir)?;
    // The echoed config sits in the output directory, so `output=.` is exact.
    let echoed = RunConfig {
        output: PathBuf::from("."),
        ..config.clone()
    };
    out.text("config.txt", &echoed.to_text())?;
    let (summary, passed) = match config.experiment {
        Experiment::Verify => run_verify(config, &mut out)?,
        Experiment::Sweep => run_sweep(config, &mut out)?,
        Experiment::Xor => run_xor(config, &mut out)?,
        Experiment::Ttest => run_ttest(config, &mut out)?,
        Experiment::Train => run_train(config, &mut out)?,
    };
    let summary = format!("{} rule={} {summary}", config.experiment, config.rule);
    Ok(RunOutcome {
        summary,
        passed,
        artifacts: out.written,
    })
}

fn programmed_bank(config: &RunConfig) -> Result<CrossbarBank> {
    let mut bank = CrossbarBank::new(config.n, config.m, config.device.clone(), config.g_b)?;
    for w in &config.program {
        bank.program(w.address, w.level)?;
    }
    Ok(bank)
}

fn run_verify(config: &RunConfig, out: &mut Artifacts) -> Result<(String, bool)> {
    let report = verify_logic(&config.rule(), config.n, config.m)?;
    let mut body = format!(
        "rule={}\nn={}\nm={}\n{}\n",
        report.rule,
        report.n,
        report.m,
        report.summary()
    );
    for mm in &report.mismatches {
        let _ = writeln!(
            body,
            "mismatch input={} at {} expected={} actual={}",
            mm.input, mm.address, mm.expected as u8, mm.actual as u8
        );
    }
    out.text("verify.txt", &body)?;
    Ok((report.summary(), report.passed()))
}

fn sweep_report(result: &SweepResult, config: &RunConfig) -> (String, usize, MirrorCheck) {
    let clusters = sweep_clusters(result, config.device.lrs_nominal);
    let mirror = mirror_check(result);
    let mut body = format!(
        "rule={}\nn={}\nm={}\ng_b={:e}\nprogrammed={}\nclusters={}\n",
        result.rule,
        result.n,
        result.m,
        result.g_b,
        result
            .programmed
            .iter()
            .map(Address::to_string)
            .collect::<Vec<_>>()
            .join(" "),
        clusters.count()
    );
    for (i, s) in clusters.summaries.iter().enumerate() {
        let _ = writeln!(
            body,
            "cluster {i} count={} mean={:.8e} std={:.8e}",
            s.count, s.mean, s.std_dev
        );
    }
    let _ = writeln!(body, "mirror={}", mirror_label(&mirror));
    (body, clusters.count(), mirror)
}

fn mirror_label(m: &MirrorCheck) -> String {
    match m {
        MirrorCheck::Pass => "PASS".into(),
        MirrorCheck::NotApplicable => "n/a".into(),
        MirrorCheck::Fail { input, g, g_mirror } => {
            format!("FAIL input={input} g={g:.8e} mirror={g_mirror:.8e}")
        }
    }
}

fn run_sweep(config: &RunConfig, out: &mut Artifacts) -> Result<(String, bool)> {
    let bank = programmed_bank(config)?;
    let result = sweep(&config.rule(), &bank)?;
    out.csv("sweep.csv", |w| result.write_csv(w))?;
    out.text("bank.txt", &bank.to_text())?;
    let (body, clusters, mirror) = sweep_report(&result, config);
    out.text("sweep_report.txt", &body)?;
    let passed = !matches!(mirror, MirrorCheck::Fail { .. });
    Ok((
        format!("clusters={clusters} mirror={}", mirror_label(&mirror)),
        passed,
    ))
}

fn xor_setup(config: &RunConfig) -> Result<(Address, (usize, usize))> {
    let rule = config.rule();
    if let Some(pair) = config.bit_pair {
        let element = *xor_elements(&rule, config.n, config.m, pair)?
            .first()
            .ok_or_else(|| {
                cmor_core::CmorError::Refused(format!(
                    "no element computes the XOR of cells {} and {}",
                    pair.0, pair.1
                ))
            })?;
        return Ok((element, pair));
    }
    let element = config.xor_element;
    let pair = *xor_pairs_for_element(&rule, config.n, config.m, element)?
        .first()
        .ok_or_else(|| {
            cmor_core::CmorError::Refused(format!(
                "element {element} is not the XOR of any input pair"
            ))
        })?;
    Ok((element, pair))
}

fn run_xor(config: &RunConfig, out: &mut Artifacts) -> Result<(String, bool)> {
    let (element, pair) = xor_setup(config)?;
    let mut bank = programmed_bank(config)?;
    if config.program.is_empty() {
        bank.program(element, 1)?;
    }
    let table = xor_experiment(&config.rule(), &bank, pair, &config.fixed_bits_or_default())?;
    out.csv("xor.csv", |w| table.write_csv(w))?;
    out.text("bank.txt", &bank.to_text())?;
    let verdict = if table.is_xor() { "PASS" } else { "FAIL" };
    out.text(
        "xor_report.txt",
        &format!(
            "element={element}\npair={},{}\nxor={verdict}\n",
            pair.0, pair.1
        ),
    )?;
    Ok((
        format!(
            "element={element} pair=({},{}) xor={verdict}",
            pair.0, pair.1
        ),
        table.is_xor(),
    ))
}

fn run_ttest(config: &RunConfig, out: &mut Artifacts) -> Result<(String, bool)> {
    let mut bank = programmed_bank(config)?;
    if config.program.is_empty() {
        bank.program(config.ttest_a, 1)?;
        bank.program(config.ttest_b, config.device.top_level())?;
    }
    let result = sweep(&config.rule(), &bank)?;
    let stats = level_ttest(
        &result,
        config.ttest_a,
        config.ttest_b,
        config.device.lrs_nominal,
    )?;
    out.csv("sweep.csv", |w| result.write_csv(w))?;
    out.text("bank.txt", &bank.to_text())?;
    let mut body = format!(
        "a={}\nb={}\ncount_a={}\nmean_a={:.8e}\nstd_a={:.8e}\ncount_b={}\nmean_b={:.8e}\nstd_b={:.8e}\nt={:.6}\ndf={}\np_value={:.6e}\nsignificant={}\n",
        stats.address_a,
        stats.address_b,
        stats.only_a.count,
        stats.only_a.mean,
        stats.only_a.std_dev,
        stats.only_b.count,
        stats.only_b.mean,
        stats.only_b.std_dev,
        stats.t,
        stats.df,
        stats.p_value,
        stats.significant()
    );
    let _ = writeln!(body, "clusters={}", stats.clusters.len());
    out.text("ttest.txt", &body)?;
    Ok((
        format!(
            "t={:.4} p={:.3e} significant={}",
            stats.t,
            stats.p_value,
            stats.significant()
        ),
        true,
    ))
}

fn run_train(config: &RunConfig, out: &mut Artifacts) -> Result<(String, bool)> {
    let dataset = match &config.dataset {
        Some(path) => fs::read_to_string(path)?.parse::<LabeledDataset>()?,
        None => {
            let (_, (a, b)) = xor_setup(config)?;
            LabeledDataset::xor_task(config.n, a, b)?
        }
    };
    if dataset.n() != Some(config.n) {
        return Err(cmor_core::CmorError::Dimension {
            expected_n: config.n,
            expected_m: config.m,
            n: dataset.n().unwrap_or(0),
            m: config.m,
        });
    }
    let labels = dataset.labels();
    let features = featurize(&dataset, &config.rule(), config.m)?;
    let model = train_linear(&features, &labels, &config.hinge)?;
    let plan = quantize_plan(
        &model.weights,
        model.bias,
        &features,
        &labels,
        &config.device,
    )?;
    let bank = plan.realize(&config.device)?;
    out.text("plan.txt", &plan.to_text())?;
    out.text("bank.txt", &bank.to_text())?;
    out.text(
        "train_report.txt",
        &format!(
            "samples={}\nobjective={:.9e}\nconverged={}\nfloat_accuracy={:.6}\nplan_accuracy={:.6}\nwrites={}\nseparability_warning={}\n",
            dataset.len(),
            model.objective,
            model.converged,
            model.accuracy(&features, &labels),
            plan.achieved_accuracy,
            plan.writes.len(),
            plan.separability_warning
        ),
    )?;
    Ok((
        format!(
            "accuracy={:.4} writes={}",
            plan.achieved_accuracy,
            plan.writes.len()
        ),
        true,
    ))
}
