// SPDX-License-Identifier: Apache-2.0

//! 1T1R crossbar readout.
//!
//! Every element of the unrolled automaton drives the gate of one device. A
//! read sums the conductance of all gated-on devices; classification compares
//! that sum against a threshold conductance `g_b`. Conductances are in siemens
//! throughout.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::eca::{Address, ReservoirTrace};
use crate::error::{CmorError, Result};

/// Forming conditions used on the fabricated parts. Kept for provenance in
/// serialized banks; the model does not depend on them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormingConditions {
    pub source_voltage: f64,
    pub compliance_current: f64,
    pub gate_voltage: f64,
}

pub const FORMING: FormingConditions = FormingConditions {
    source_voltage: 3.3,
    compliance_current: 1e-3,
    gate_voltage: 1.2,
};

/// Threshold conductance used for the XOR demonstration.
pub const XOR_BOUNDARY: f64 = 1.2e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceParams {
    pub lrs_nominal: f64,
    /// Relative standard deviation of a programmed LRS device.
    pub lrs_sigma: f64,
    pub hrs_nominal: f64,
    pub hrs_sigma: f64,
    /// What an enabled level-0 device contributes to a read.
    pub parasitic_enabled: f64,
    /// Explicit multi-level table. Empty means `[hrs_nominal, lrs_nominal]`.
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            lrs_nominal: 1.5e-3,
            lrs_sigma: 0.02,
            hrs_nominal: 1e-6,
            hrs_sigma: 0.05,
            parasitic_enabled: 15e-6,
            levels: Vec::new(),
            seed: 42,
        }
    }
}

impl DeviceParams {
    /// No variation, no HRS leakage, no parasitic contribution.
    pub fn ideal() -> Self {
        DeviceParams {
            lrs_sigma: 0.0,
            hrs_nominal: 0.0,
            hrs_sigma: 0.0,
            parasitic_enabled: 0.0,
            ..DeviceParams::default()
        }
    }

    /// Same nominal values with device-to-device variation switched off.
    pub fn without_variation(&self) -> Self {
        DeviceParams {
            lrs_sigma: 0.0,
            hrs_sigma: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let conductances = [
            ("lrs_nominal", self.lrs_nominal),
            ("hrs_nominal", self.hrs_nominal),
            ("parasitic_enabled", self.parasitic_enabled),
        ];
        for (name, value) in conductances {
            if !value.is_finite() || value < 0.0 {
                return Err(CmorError::domain(format!(
                    "{name} must be a finite non-negative conductance, got {value}"
                )));
            }
        }
        for (name, value) in [("lrs_sigma", self.lrs_sigma), ("hrs_sigma", self.hrs_sigma)] {
            if !value.is_finite() || value < 0.0 {
                return Err(CmorError::domain(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if self.lrs_nominal <= self.hrs_nominal {
            return Err(CmorError::domain(format!(
                "lrs_nominal ({:e}) must exceed hrs_nominal ({:e})",
                self.lrs_nominal, self.hrs_nominal
            )));
        }
        if !self.levels.is_empty() {
            if self.levels.len() < 2 {
                return Err(CmorError::domain("a level table needs at least two levels"));
            }
            if self.levels.iter().any(|g| !g.is_finite() || *g < 0.0) {
                return Err(CmorError::domain(
                    "levels must be finite non-negative conductances",
                ));
            }
            if self.levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CmorError::domain("levels must be strictly increasing"));
            }
        }
        Ok(())
    }

    /// Nominal conductance per level index; index 0 is the HRS/unformed state.
    pub fn level_table(&self) -> Vec<f64> {
        if self.levels.is_empty() {
            vec![self.hrs_nominal, self.lrs_nominal]
        } else {
            self.levels.clone()
        }
    }

    pub fn top_level(&self) -> usize {
        self.level_table().len() - 1
    }

    pub fn sigma_for(&self, level: usize) -> f64 {
        if level == 0 {
            self.hrs_sigma
        } else {
            self.lrs_sigma
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceState {
    pub address: Address,
    /// Programmed level index; 0 is HRS/unformed.
    pub level: usize,
    /// Conductance fixed when the device was last written.
    pub g_actual: f64,
    /// Programming writes since the bank was created.
    pub writes: u32,
}

impl DeviceState {
    pub fn is_programmed(&self) -> bool {
        self.level > 0
    }
}

/// Binary class produced by the threshold comparator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Class {
    Negative,
    Positive,
}

impl Class {
    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Class::Negative => -1,
            Class::Positive => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Class::Negative => "-1",
            Class::Positive => "+1",
        }
    }
}

impl FromStr for Class {
    type Err = CmorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" => Ok(Class::Positive),
            "-1" => Ok(Class::Negative),
            other => Err(CmorError::domain(format!(
                "label {other:?} is not +1 or -1"
            ))),
        }
    }
}

/// Threshold comparison; a sum exactly at the threshold reads as negative.
pub fn threshold_class(g_sigma: f64, g_b: f64) -> Class {
    Class::from_sign(g_sigma > g_b)
}

/// Round to the 9 significant digits used in serialized banks, so a bank
/// written to text and read back is bit-identical.
fn round_sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The sample a device gets depends only on the bank seed, its position and
/// how many times it has been written, never on programming order.
fn sample_conductance(params: &DeviceParams, index: usize, writes: u32, level: usize) -> f64 {
    let nominal = params.level_table()[level];
    let sigma = params.sigma_for(level);
    if sigma == 0.0 {
        return round_sig9(nominal);
    }
    let stream = mix(params.seed ^ mix(((index as u64) << 32) | u64::from(writes)));
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let z: f64 = StandardNormal.sample(&mut rng);
    round_sig9((nominal * (1.0 + sigma * z)).max(0.0))
}

/// `m x n` grid of 1T1R devices plus the comparator threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossbarBank {
    n: usize,
    m: usize,
    devices: Vec<DeviceState>,
    params: DeviceParams,
    g_b: f64,
}

impl CrossbarBank {
    /// Fresh bank with every device in HRS.
    pub fn new(n: usize, m: usize, params: DeviceParams, g_b: f64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(CmorError::domain("bank dimensions must be at least 1x1"));
        }
        params.validate()?;
        check_threshold(g_b)?;
        let devices = (0..n * m)
            .map(|i| DeviceState {
                address: Address::from_flat_index(i, n),
                level: 0,
                g_actual: sample_conductance(&params, i, 0, 0),
                writes: 0,
            })
            .collect();
        Ok(CrossbarBank {
            n,
            m,
            devices,
            params,
            g_b,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn g_b(&self) -> f64 {
        self.g_b
    }

    pub fn set_g_b(&mut self, g_b: f64) -> Result<()> {
        check_threshold(g_b)?;
        self.g_b = g_b;
        Ok(())
    }

    /// Devices in iteration-major, cell-minor order.
    pub fn devices(&self) -> &[DeviceState] {
        &self.devices
    }

    pub fn device(&self, address: Address) -> Result<&DeviceState> {
        address.check(self.n, self.m)?;
        Ok(&self.devices[address.flat_index(self.n)])
    }

    pub fn programmed(&self) -> impl Iterator<Item = &DeviceState> {
        self.devices.iter().filter(|d| d.is_programmed())
    }

    /// Write one device to `level` and resample its conductance.
    pub fn program(&mut self, address: Address, level: usize) -> Result<()> {
        address.check(self.n, self.m)?;
        let top = self.params.top_level();
        if level > top {
            return Err(CmorError::domain(format!(
                "level {level} is outside 0..={top}"
            )));
        }
        let index = address.flat_index(self.n);
        let device = &mut self.devices[index];
        device.writes += 1;
        device.level = level;
        device.g_actual = sample_conductance(&self.params, index, device.writes, level);
        Ok(())
    }

    /// Conductance a device adds to a read while its gate is on.
    pub fn effective_conductance(&self, device: &DeviceState) -> f64 {
        if device.is_programmed() {
            device.g_actual
        } else {
            self.params.parasitic_enabled
        }
    }

    fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if n != self.n || m != self.m {
            return Err(CmorError::Dimension {
                expected_n: self.n,
                expected_m: self.m,
                n,
                m,
            });
        }
        Ok(())
    }

    /// Gated sum over all devices, accumulated in iteration-major order.
    pub fn read_conductance(&self, trace: &ReservoirTrace) -> Result<f64> {
        self.check_dims(trace.n(), trace.m())?;
        Ok(self
            .devices
            .iter()
            .filter(|d| trace.bit(d.address))
            .fold(0.0, |acc, d| acc + self.effective_conductance(d)))
    }

    /// Gated sum for an already-flattened trace (0/1 per device).
    pub fn read_flat(&self, gates: &[u8]) -> Result<f64> {
        if gates.len() != self.devices.len() {
            return Err(CmorError::domain(format!(
                "expected {} gate values, got {}",
                self.devices.len(),
                gates.len()
            )));
        }
        Ok(self
            .devices
            .iter()
            .zip(gates)
            .filter(|(_, &g)| g != 0)
            .fold(0.0, |acc, (d, _)| acc + self.effective_conductance(d)))
    }

    pub fn classify(&self, trace: &ReservoirTrace) -> Result<Class> {
        Ok(threshold_class(self.read_conductance(trace)?, self.g_b))
    }

    /// Text form: params, seed and one `device` line per element.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        out.push_str("# cmor crossbar bank\n");
        let _ = writeln!(
            out,
            "# forming: source {} V, compliance {:e} A, gate {} V",
            FORMING.source_voltage, FORMING.compliance_current, FORMING.gate_voltage
        );
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "m={}", self.m);
        let _ = writeln!(out, "g_b={:e}", self.g_b);
        let _ = writeln!(out, "seed={}", p.seed);
        let _ = writeln!(out, "lrs_nominal={:e}", p.lrs_nominal);
        let _ = writeln!(out, "lrs_sigma={}", p.lrs_sigma);
        let _ = writeln!(out, "hrs_nominal={:e}", p.hrs_nominal);
        let _ = writeln!(out, "hrs_sigma={}", p.hrs_sigma);
        let _ = writeln!(out, "parasitic_enabled={:e}", p.parasitic_enabled);
        let levels: Vec<String> = p.levels.iter().map(|g| format!("{g:e}")).collect();
        let _ = writeln!(out, "levels={}", levels.join(","));
        out.push_str("# device <iteration> <cell> <level> <g_actual_siemens> <writes>\n");
        for d in &self.devices {
            let _ = writeln!(
                out,
                "device {} {} {} {:.8e} {}",
                d.address.iteration, d.address.cell, d.level, d.g_actual, d.writes
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut m = None;
        let mut g_b = None;
        let mut params = DeviceParams::default();
        let mut devices = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("device ") {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 5 {
                    return Err(CmorError::parse(line_no, "device line needs 5 fields"));
                }
                let int = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| CmorError::parse(line_no, format!("{s:?}: {e}")))
                };
                let g_actual: f64 = fields[3]
                    .parse()
                    .map_err(|e| CmorError::parse(line_no, format!("{:?}: {e}", fields[3])))?;
                let writes: u32 = fields[4]
                    .parse()
                    .map_err(|e| CmorError::parse(line_no, format!("{:?}: {e}", fields[4])))?;
                devices.push(DeviceState {
                    address: Address::new(int(fields[0])?, int(fields[1])?),
                    level: int(fields[2])?,
                    g_actual,
                    writes,
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CmorError::parse(line_no, "expected key=value"))?;
            let value = value.trim();
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|e| CmorError::parse(line_no, format!("{key}: {e}")))
            };
            match key.trim() {
                "n" => {
                    n = Some(
                        value
                            .parse()
                            .map_err(|e| CmorError::parse(line_no, format!("n: {e}")))?,
                    )
                }
                "m" => {
                    m = Some(
                        value
                            .parse()
                            .map_err(|e| CmorError::parse(line_no, format!("m: {e}")))?,
                    )
                }
                "g_b" => g_b = Some(float()?),
                "seed" => {
                    params.seed = value
                        .parse()
                        .map_err(|e| CmorError::parse(line_no, format!("seed: {e}")))?
                }
                "lrs_nominal" => params.lrs_nominal = float()?,
                "lrs_sigma" => params.lrs_sigma = float()?,
                "hrs_nominal" => params.hrs_nominal = float()?,
                "hrs_sigma" => params.hrs_sigma = float()?,
                "parasitic_enabled" => params.parasitic_enabled = float()?,
                "levels" => {
                    params.levels =
                        parse_levels(value).map_err(|e| CmorError::parse(line_no, e.to_string()))?
                }
                other => return Err(CmorError::parse(line_no, format!("unknown key {other:?}"))),
            }
        }

        let n: usize = n.ok_or_else(|| CmorError::parse(0, "missing n"))?;
        let m: usize = m.ok_or_else(|| CmorError::parse(0, "missing m"))?;
        let g_b = g_b.ok_or_else(|| CmorError::parse(0, "missing g_b"))?;
        let mut bank = CrossbarBank::new(n, m, params, g_b)?;
        if devices.len() != n * m {
            return Err(CmorError::parse(
                0,
                format!("expected {} device lines, found {}", n * m, devices.len()),
            ));
        }
        let top = bank.params.top_level();
        for d in devices {
            d.address.check(n, m)?;
            if d.level > top || !d.g_actual.is_finite() || d.g_actual < 0.0 {
                return Err(CmorError::domain(format!(
                    "invalid device record at {}",
                    d.address
                )));
            }
            let index = d.address.flat_index(n);
            bank.devices[index] = d;
        }
        Ok(bank)
    }
}

fn check_threshold(g_b: f64) -> Result<()> {
    if g_b.is_finite() && g_b >= 0.0 {
        Ok(())
    } else {
        Err(CmorError::domain(format!(
            "threshold g_b must be a finite non-negative conductance, got {g_b}"
        )))
    }
}

/// Comma-separated conductances; an empty string yields an empty table.
pub fn parse_levels(value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CmorError::domain(format!("level {s:?}: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eca::{run_reservoir, LatticeState, Rule};

    fn trace_for(value: u64, rule: u8) -> ReservoirTrace {
        let x = LatticeState::from_value(value, 8).unwrap();
        run_reservoir(&x, &Rule::new(rule), 7).unwrap()
    }

    #[test]
    fn default_bank_has_56_devices() {
        let bank = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
        assert_eq!(bank.len(), 56);
        assert!(bank
            .devices()
            .iter()
            .all(|d| d.level == 0 && d.g_actual >= 0.0));
    }

    #[test]
    fn ideal_bank_reads_zero() {
        let bank = CrossbarBank::new(8, 7, DeviceParams::ideal(), 0.0).unwrap();
        for v in 0..256 {
            assert_eq!(bank.read_conductance(&trace_for(v, 60)).unwrap(), 0.0);
        }
    }

    #[test]
    fn same_seed_same_bank() {
        let a = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
        let b = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
        assert_eq!(a, b);
        let other = DeviceParams {
            seed: 7,
            ..DeviceParams::default()
        };
        let c = CrossbarBank::new(8, 7, other, 1.2e-3).unwrap();
        assert_ne!(a.devices()[0].g_actual, c.devices()[0].g_actual);
    }

    #[test]
    fn ideal_programming_is_exact() {
        let mut bank = CrossbarBank::new(8, 7, DeviceParams::ideal(), 1.2e-3).unwrap();
        bank.program(Address::new(2, 7), 1).unwrap();
        assert_eq!(bank.device(Address::new(2, 7)).unwrap().g_actual, 1.5e-3);
        assert_eq!(bank.programmed().count(), 1);
    }

    #[test]
    fn program_rejects_bad_address_and_level() {
        let mut bank = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
        assert!(matches!(
            bank.program(Address::new(8, 1), 1),
            Err(CmorError::Address { .. })
        ));
        assert!(bank.program(Address::new(1, 0), 1).is_err());
        assert!(bank.program(Address::new(1, 1), 2).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = DeviceParams {
            hrs_nominal: 2e-3,
            ..DeviceParams::default()
        };
        assert!(CrossbarBank::new(8, 7, p, 1e-3).is_err());
        let p = DeviceParams {
            levels: vec![0.0, 1e-3, 1e-3],
            ..DeviceParams::default()
        };
        assert!(CrossbarBank::new(8, 7, p, 1e-3).is_err());
        assert!(CrossbarBank::new(8, 7, DeviceParams::default(), -1.0).is_err());
        assert!(CrossbarBank::new(0, 7, DeviceParams::default(), 1.0).is_err());
    }

    #[test]
    fn varied_devices_differ() {
        for seed in 0..200 {
            let p = DeviceParams {
                seed,
                ..DeviceParams::default()
            };
            let mut bank = CrossbarBank::new(8, 7, p, 1.2e-3).unwrap();
            bank.program(Address::new(2, 7), 1).unwrap();
            bank.program(Address::new(4, 7), 1).unwrap();
            let a = bank.device(Address::new(2, 7)).unwrap().g_actual;
            let b = bank.device(Address::new(4, 7)).unwrap().g_actual;
            assert_ne!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn all_zero_trace_reads_zero() {
        let mut bank = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
        bank.program(Address::new(2, 7), 1).unwrap();
        // rule 60 from the all-zero input never leaves the quiescent state
        assert_eq!(bank.read_conductance(&trace_for(0, 60)).unwrap(), 0.0);
    }

    #[test]
    fn single_device_read_and_classify() {
        let params = DeviceParams::ideal();
        let mut bank = CrossbarBank::new(8, 7, params, XOR_BOUNDARY).unwrap();
        bank.program(Address::new(2, 7), 1).unwrap();
        let rows: Vec<LatticeState> = (1..=7)
            .map(|g| {
                let s = LatticeState::zeros(8).unwrap();
                if g == 2 {
                    s.with_cell(7, true)
                } else {
                    s
                }
            })
            .collect();
        let trace = ReservoirTrace::from_rows(rows).unwrap();
        assert_eq!(bank.read_conductance(&trace).unwrap(), 1.5e-3);
        assert_eq!(bank.classify(&trace).unwrap(), Class::Positive);
    }

    #[test]
    fn unprogrammed_ideal_bank_is_negative() {
        let bank = CrossbarBank::new(8, 7, DeviceParams::ideal(), 1e-4).unwrap();
        for v in 0..256 {
            assert_eq!(bank.classify(&trace_for(v, 90)).unwrap(), Class::Negative);
        }
    }

    #[test]
    fn tie_reads_negative() {
        assert_eq!(threshold_class(1.2e-3, 1.2e-3), Class::Negative);
        assert_eq!(threshold_class(1.2000001e-3, 1.2e-3), Class::Positive);
    }

    #[test]
    fn dimension_mismatch() {
        let bank = CrossbarBank::new(8, 6, DeviceParams::default(), 1.2e-3).unwrap();
        assert!(matches!(
            bank.read_conductance(&trace_for(3, 60)),
            Err(CmorError::Dimension { .. })
        ));
    }

    #[test]
    fn text_round_trip_reads_identically() {
        let params = DeviceParams {
            levels: vec![1e-6, 1.5e-3, 1.53e-3],
            seed: 99,
            ..DeviceParams::default()
        };
        let mut bank = CrossbarBank::new(8, 7, params, 1.2e-3).unwrap();
        bank.program(Address::new(2, 7), 1).unwrap();
        bank.program(Address::new(4, 7), 2).unwrap();
        let text = bank.to_text();
        let back = CrossbarBank::from_text(&text).unwrap();
        assert_eq!(back, bank);
        for v in 0..256 {
            let t = trace_for(v, 60);
            assert_eq!(
                back.read_conductance(&t).unwrap().to_bits(),
                bank.read_conductance(&t).unwrap().to_bits()
            );
        }
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn from_text_reports_line() {
        let err = CrossbarBank::from_text("n=8\nm=x\n").unwrap_err();
        assert!(matches!(err, CmorError::Parse { line: 2, .. }), "{err}");
    }
}
