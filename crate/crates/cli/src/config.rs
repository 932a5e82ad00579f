// SPDX-License-Identifier: Apache-2.0

//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected. Every key is optional; the defaults describe the 8x7 rule-60
//! circuit with the default device model. See the README for the full key
//! list.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cmor_core::reram::parse_levels;
use cmor_core::{Address, CmorError, DeviceParams, HingeConfig, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Verify,
    Sweep,
    Xor,
    Ttest,
    Train,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Verify => "verify",
            Experiment::Sweep => "sweep",
            Experiment::Xor => "xor",
            Experiment::Ttest => "ttest",
            Experiment::Train => "train",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "verify" => Ok(Experiment::Verify),
            "sweep" => Ok(Experiment::Sweep),
            "xor" => Ok(Experiment::Xor),
            "ttest" => Ok(Experiment::Ttest),
            "train" => Ok(Experiment::Train),
            other => Err(format!(
                "unknown experiment {other:?} (expected verify, sweep, xor, ttest or train)"
            )),
        }
    }
}

/// A device write requested by the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Write {
    pub address: Address,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub rule: u8,
    pub n: usize,
    pub m: usize,
    pub device: DeviceParams,
    pub g_b: f64,
    /// Writes applied before a sweep or t-test.
    pub program: Vec<Write>,
    pub xor_element: Address,
    /// Overrides the pair derived from `xor_element`.
    pub bit_pair: Option<(usize, usize)>,
    /// Values for the cells outside the XOR pair, ascending cell order.
    pub fixed_bits: Option<Vec<bool>>,
    pub ttest_a: Address,
    pub ttest_b: Address,
    /// Training data; the XOR task of the derived pair when absent.
    pub dataset: Option<PathBuf>,
    pub hinge: HingeConfig,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Verify,
            rule: 60,
            n: 8,
            m: 7,
            device: DeviceParams::default(),
            g_b: cmor_core::reram::XOR_BOUNDARY,
            program: Vec::new(),
            xor_element: Address::new(2, 7),
            bit_pair: None,
            fixed_bits: None,
            ttest_a: Address::new(2, 7),
            ttest_b: Address::new(4, 7),
            dataset: None,
            hinge: HingeConfig::default(),
            output: PathBuf::from("out"),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CmorError {
    CmorError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| invalid(key, format!("{value:?}: {e}")))
}

fn parse_program(value: &str) -> Result<Vec<Write>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<&str> = item.split(':').collect();
            let [it, cell, level] = parts[..] else {
                return Err(invalid(
                    "program",
                    format!("{item:?} is not iteration:cell:level"),
                ));
            };
            Ok(Write {
                address: Address::new(parse_num("program", it)?, parse_num("program", cell)?),
                level: parse_num("program", level)?,
            })
        })
        .collect()
}

fn parse_address(key: &str, value: &str) -> Result<Address> {
    value
        .parse()
        .map_err(|e: CmorError| invalid(key, e.to_string()))
}

fn parse_bits(key: &str, value: &str) -> Result<Vec<bool>> {
    value
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(invalid(key, format!("unexpected character {other:?}"))),
        })
        .collect()
}

impl RunConfig {
    /// Apply one `key=value` pair. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: String| invalid(key, e))?,
            "rule" => {
                let number: i64 = parse_num(key, value)?;
                self.rule = u8::try_from(number)
                    .map_err(|_| invalid(key, format!("{number} is outside 0..=255")))?;
            }
            "n" => self.n = parse_num(key, value)?,
            "m" => self.m = parse_num(key, value)?,
            "seed" => self.device.seed = parse_num(key, value)?,
            "g_b" => self.g_b = parse_num(key, value)?,
            "lrs_nominal" => self.device.lrs_nominal = parse_num(key, value)?,
            "lrs_sigma" => self.device.lrs_sigma = parse_num(key, value)?,
            "hrs_nominal" => self.device.hrs_nominal = parse_num(key, value)?,
            "hrs_sigma" => self.device.hrs_sigma = parse_num(key, value)?,
            "parasitic_enabled" => self.device.parasitic_enabled = parse_num(key, value)?,
            "levels" => {
                self.device.levels = parse_levels(value).map_err(|e| invalid(key, e.to_string()))?
            }
            "program" => self.program = parse_program(value)?,
            "xor_element" => self.xor_element = parse_address(key, value)?,
            "bit_pair" => {
                self.bit_pair = if value.is_empty() {
                    None
                } else {
                    let (a, b) = value
                        .split_once(',')
                        .ok_or_else(|| invalid(key, "expected a,b"))?;
                    Some((parse_num(key, a.trim())?, parse_num(key, b.trim())?))
                }
            }
            "fixed_bits" => {
                self.fixed_bits = if value.is_empty() {
                    None
                } else {
                    Some(parse_bits(key, value)?)
                }
            }
            "ttest_a" => self.ttest_a = parse_address(key, value)?,
            "ttest_b" => self.ttest_b = parse_address(key, value)?,
            "dataset" => {
                self.dataset = if value.is_empty() {
                    None
                } else {
                    let path = base.join(value);
                    if !path.is_file() {
                        return Err(invalid(key, format!("{} does not exist", path.display())));
                    }
                    Some(path)
                }
            }
            "epochs" => self.hinge.epochs = parse_num(key, value)?,
            "learning_rate" => self.hinge.learning_rate = parse_num(key, value)?,
            "l2" => self.hinge.l2 = parse_num(key, value)?,
            "tolerance" => self.hinge.tolerance = parse_num(key, value)?,
            "nonnegative" => self.hinge.nonnegative = parse_num(key, value)?,
            "output" => self.output = base.join(value),
            other => return Err(invalid(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < cmor_core::eca::MIN_CELLS || self.n > cmor_core::eca::MAX_CELLS {
            return Err(invalid("n", format!("{} is outside 3..=64", self.n)));
        }
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if !(self.g_b.is_finite() && self.g_b >= 0.0) {
            return Err(invalid("g_b", "must be a non-negative conductance"));
        }
        self.device
            .validate()
            .map_err(|e| invalid("device", e.to_string()))?;
        let top = self.device.top_level();
        for w in &self.program {
            w.address
                .check(self.n, self.m)
                .map_err(|e| invalid("program", e.to_string()))?;
            if w.level > top {
                return Err(invalid(
                    "program",
                    format!("level {} exceeds {top}", w.level),
                ));
            }
        }
        // Addresses are only checked for the experiment that reads them.
        let mut used = Vec::new();
        match self.experiment {
            Experiment::Xor if self.bit_pair.is_none() => {
                used.push(("xor_element", self.xor_element))
            }
            Experiment::Train if self.bit_pair.is_none() && self.dataset.is_none() => {
                used.push(("xor_element", self.xor_element))
            }
            Experiment::Ttest => {
                used.push(("ttest_a", self.ttest_a));
                used.push(("ttest_b", self.ttest_b));
            }
            _ => {}
        }
        for (key, a) in used {
            a.check(self.n, self.m)
                .map_err(|e| invalid(key, e.to_string()))?;
        }
        if let Some(bits) = &self.fixed_bits {
            if bits.len() + 2 != self.n {
                return Err(invalid(
                    "fixed_bits",
                    format!("expected {} bits", self.n - 2),
                ));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CmorError::Parse {
                line: idx + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            config.set(key.trim(), value, base).map_err(|e| match e {
                CmorError::InvalidValue { key, message } if message == "unknown key" => {
                    CmorError::Parse {
                        line: idx + 1,
                        message: format!("unknown key {key:?}"),
                    }
                }
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_text(&self) -> String {
        let d = &self.device;
        let mut out = String::from("# cmor run configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("experiment", self.experiment.to_string());
        kv("rule", self.rule.to_string());
        kv("n", self.n.to_string());
        kv("m", self.m.to_string());
        kv("seed", d.seed.to_string());
        kv("g_b", format!("{:e}", self.g_b));
        kv("lrs_nominal", format!("{:e}", d.lrs_nominal));
        kv("lrs_sigma", d.lrs_sigma.to_string());
        kv("hrs_nominal", format!("{:e}", d.hrs_nominal));
        kv("hrs_sigma", d.hrs_sigma.to_string());
        kv("parasitic_enabled", format!("{:e}", d.parasitic_enabled));
        kv(
            "levels",
            d.levels
                .iter()
                .map(|g| format!("{g:e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "program",
            self.program
                .iter()
                .map(|w| format!("{}:{}:{}", w.address.iteration, w.address.cell, w.level))
                .collect::<Vec<_>>()
                .join(","),
        );
        let addr = |a: Address| format!("{}:{}", a.iteration, a.cell);
        kv("xor_element", addr(self.xor_element));
        kv(
            "bit_pair",
            self.bit_pair
                .map(|(a, b)| format!("{a},{b}"))
                .unwrap_or_default(),
        );
        kv(
            "fixed_bits",
            self.fixed_bits
                .as_ref()
                .map(|b| b.iter().map(|&x| if x { '1' } else { '0' }).collect())
                .unwrap_or_default(),
        );
        kv("ttest_a", addr(self.ttest_a));
        kv("ttest_b", addr(self.ttest_b));
        kv(
            "dataset",
            self.dataset
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("epochs", self.hinge.epochs.to_string());
        kv("learning_rate", self.hinge.learning_rate.to_string());
        kv("l2", self.hinge.l2.to_string());
        kv("tolerance", self.hinge.tolerance.to_string());
        kv("nonnegative", self.hinge.nonnegative.to_string());
        kv("output", self.output.display().to_string());
        out
    }

    /// Fixed bits for the XOR experiment, all zero unless configured.
    pub fn fixed_bits_or_default(&self) -> Vec<bool> {
        self.fixed_bits
            .clone()
            .unwrap_or_else(|| vec![false; self.n - 2])
    }

    pub fn rule(&self) -> cmor_core::Rule {
        cmor_core::Rule::new(self.rule)
    }
}

/// Read a configuration file; relative paths inside it resolve against the
/// file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    RunConfig::parse(&text, base)
}

pub fn save_config(config: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, config.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let c = RunConfig::parse("rule=60\n", Path::new(".")).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.m, 7);
        assert_eq!(c.device, DeviceParams::default());
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn rule_out_of_range_names_key() {
        let err = RunConfig::parse("rule=300\n", Path::new(".")).unwrap_err();
        match err {
            CmorError::InvalidValue { key, .. } => assert_eq!(key, "rule"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("# hi\nrule=60\nbogus=1\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, CmorError::Parse { line: 3, .. }), "{err}");
        let err = RunConfig::parse("rule 60\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, CmorError::Parse { line: 1, .. }));
    }

    #[test]
    fn missing_dataset_is_rejected() {
        let err = RunConfig::parse("dataset=nope.txt\n", Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, CmorError::InvalidValue { ref key, .. } if key == "dataset"));
    }

    #[test]
    fn program_and_addresses() {
        let c = RunConfig::parse(
            "levels=1e-6,1.5e-3,1.56e-3\nprogram=2:7:1, 4:7:2\nxor_element=(1,2)\nbit_pair=1,2\nfixed_bits=101010\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.program.len(), 2);
        assert_eq!(c.program[1].level, 2);
        assert_eq!(c.xor_element, Address::new(1, 2));
        assert_eq!(c.bit_pair, Some((1, 2)));
        assert!(RunConfig::parse("program=9:1:1\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("program=1:1:2\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("fixed_bits=11\n", Path::new(".")).is_err());
    }
}
