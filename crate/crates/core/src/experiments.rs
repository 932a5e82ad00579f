// SPDX-License-Identifier: Apache-2.0

//! Simulated bench measurements: logic verification, conductance sweeps over
//! every input, mirror symmetry, the single-element XOR and the t-test that
//! separates two programmed levels.

use std::io::Write;

use crate::eca::{run_reservoir, run_reservoir_with, step, Address, LatticeState, Rule};
use crate::error::{CmorError, Result};
use crate::reram::{Class, CrossbarBank};
use crate::stats::{pooled_t_test, SampleSummary, LEVEL_ALPHA};

/// Widest ring any exhaustive sweep accepts.
pub const MAX_SWEEP_CELLS: usize = 20;

fn check_sweep_width(n: usize) -> Result<()> {
    if n > MAX_SWEEP_CELLS {
        Err(CmorError::Refused(format!(
            "2^{n} inputs exceeds the 2^{MAX_SWEEP_CELLS} sweep limit"
        )))
    } else {
        Ok(())
    }
}

/// Reference update: per-cell lookup of the rule number's bits on a plain
/// vector, with no shared code path with the packed `step`.
pub fn reference_step(cells: &[u8], rule_number: u8) -> Vec<u8> {
    let n = cells.len();
    let mut next = vec![0u8; n];
    for i in 0..n {
        let left = cells[(i + n - 1) % n];
        let center = cells[i];
        let right = cells[(i + 1) % n];
        next[i] = (rule_number >> (left * 4 + center * 2 + right)) & 1;
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub input: u64,
    pub address: Address,
    pub expected: bool,
    pub actual: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicReport {
    pub rule: u8,
    pub n: usize,
    pub m: usize,
    pub inputs_checked: usize,
    /// Inputs whose whole trace matched the reference.
    pub inputs_passed: usize,
    pub mismatches: Vec<Mismatch>,
}

impl LogicReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn summary(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        format!(
            "{verdict} {}/{} inputs",
            self.inputs_passed, self.inputs_checked
        )
    }
}

pub fn verify_logic(rule: &Rule, n: usize, m: usize) -> Result<LogicReport> {
    verify_logic_with(rule, n, m, step)
}

/// Check an arbitrary update function against [`reference_step`] for every
/// `n`-bit input over `m` generations.
pub fn verify_logic_with<F>(rule: &Rule, n: usize, m: usize, stepper: F) -> Result<LogicReport>
where
    F: Fn(&LatticeState, &Rule) -> LatticeState,
{
    check_sweep_width(n)?;
    let mut mismatches = Vec::new();
    let mut inputs_passed = 0;
    let total = 1usize << n;
    for value in 0..total as u64 {
        let input = LatticeState::from_value(value, n)?;
        let trace = run_reservoir_with(&input, rule, m, &stepper)?;
        let mut expected: Vec<u8> = input.cells().map(u8::from).collect();
        let mut clean = true;
        for (g, row) in trace.rows().iter().enumerate() {
            expected = reference_step(&expected, rule.number());
            for (c, (&want, got)) in expected.iter().zip(row.cells()).enumerate() {
                if (want == 1) != got {
                    clean = false;
                    mismatches.push(Mismatch {
                        input: value,
                        address: Address::new(g + 1, c + 1),
                        expected: want == 1,
                        actual: got,
                    });
                }
            }
        }
        if clean {
            inputs_passed += 1;
        }
    }
    Ok(LogicReport {
        rule: rule.number(),
        n,
        m,
        inputs_checked: total,
        inputs_passed,
        mismatches,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub input: u64,
    pub g_sigma: f64,
    pub class: Class,
    /// Gate state of each programmed address, same order as
    /// [`SweepResult::programmed`].
    pub enabled: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rule: u8,
    pub n: usize,
    pub m: usize,
    pub programmed: Vec<Address>,
    /// One record per input value, ascending.
    pub records: Vec<SweepRecord>,
    pub g_b: f64,
}

impl SweepResult {
    pub fn conductances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.g_sigma).collect()
    }

    fn enabled_column(&self, address: Address) -> Result<usize> {
        self.programmed
            .iter()
            .position(|&a| a == address)
            .ok_or_else(|| CmorError::domain(format!("{address} is not programmed in this sweep")))
    }

    /// CSV with one record per input; conductances in siemens, 9 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "input".to_string(),
            "g_sigma_siemens".to_string(),
            "class".to_string(),
        ];
        header.extend((0..self.programmed.len()).map(enabled_column_name));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.input.to_string(),
                format!("{:.8e}", r.g_sigma),
                r.class.label().to_string(),
            ];
            row.extend(r.enabled.iter().map(|&e| u8::from(e).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `enabled_a`, `enabled_b`, ... then `enabled_27` onward.
fn enabled_column_name(i: usize) -> String {
    if i < 26 {
        format!("enabled_{}", (b'a' + i as u8) as char)
    } else {
        format!("enabled_{}", i + 1)
    }
}

/// Read the bank for every `n`-bit input.
pub fn sweep(rule: &Rule, bank: &CrossbarBank) -> Result<SweepResult> {
    let (n, m) = (bank.n(), bank.m());
    check_sweep_width(n)?;
    let programmed: Vec<Address> = bank.programmed().map(|d| d.address).collect();
    let records = (0..1u64 << n)
        .map(|value| {
            let input = LatticeState::from_value(value, n)?;
            let trace = run_reservoir(&input, rule, m)?;
            let g_sigma = bank.read_conductance(&trace)?;
            let enabled = programmed
                .iter()
                .map(|a| trace.cell_state(a.iteration, a.cell))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRecord {
                input: value,
                g_sigma,
                class: crate::reram::threshold_class(g_sigma, bank.g_b()),
                enabled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        rule: rule.number(),
        n,
        m,
        programmed,
        records,
        g_b: bank.g_b(),
    })
}

/// Split fraction of the nominal LRS conductance used to separate clusters.
pub const CLUSTER_GAP_FRACTION: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct Clusters {
    /// Cluster index per input value; clusters are numbered by ascending
    /// conductance.
    pub assignments: Vec<usize>,
    pub summaries: Vec<SampleSummary>,
}

impl Clusters {
    pub fn count(&self) -> usize {
        self.summaries.len()
    }
}

/// One-dimensional gap clustering: sort, then cut wherever two neighbors are
/// more than `gap` apart.
pub fn gap_clusters(values: &[f64], gap: f64) -> Clusters {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut assignments = vec![0; values.len()];
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &i in &order {
        let v = values[i];
        if prev.is_none_or(|p| v - p > gap) {
            groups.push(Vec::new());
        }
        assignments[i] = groups.len() - 1;
        groups.last_mut().expect("group exists").push(v);
        prev = Some(v);
    }
    let summaries = groups.iter().filter_map(|g| SampleSummary::of(g)).collect();
    Clusters {
        assignments,
        summaries,
    }
}

/// Clusters of a sweep at the default gap for `lrs_nominal`.
pub fn sweep_clusters(result: &SweepResult, lrs_nominal: f64) -> Clusters {
    gap_clusters(&result.conductances(), CLUSTER_GAP_FRACTION * lrs_nominal)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MirrorCheck {
    Pass,
    Fail {
        input: u64,
        g: f64,
        g_mirror: f64,
    },
    /// The rule does not map complementary states to the same successor, so
    /// no symmetry is expected.
    NotApplicable,
}

impl MirrorCheck {
    pub fn passed(&self) -> bool {
        matches!(self, MirrorCheck::Pass)
    }
}

/// Exact equality of `G(x)` and `G(!x)` over the whole sweep.
pub fn mirror_check(result: &SweepResult) -> MirrorCheck {
    if !Rule::new(result.rule).is_bit_flip_symmetric() {
        return MirrorCheck::NotApplicable;
    }
    let all = (1u64 << result.n) - 1;
    for r in &result.records {
        let mirror = &result.records[(all - r.input) as usize];
        if r.g_sigma.to_bits() != mirror.g_sigma.to_bits() {
            return MirrorCheck::Fail {
                input: r.input,
                g: r.g_sigma,
                g_mirror: mirror.g_sigma,
            };
        }
    }
    MirrorCheck::Pass
}

/// Elements of the unrolled automaton whose state equals `x_a XOR x_b` for
/// every input.
pub fn xor_elements(rule: &Rule, n: usize, m: usize, pair: (usize, usize)) -> Result<Vec<Address>> {
    check_sweep_width(n)?;
    check_pair(n, pair)?;
    let mut candidates: Vec<Address> = (0..n * m).map(|i| Address::from_flat_index(i, n)).collect();
    for value in 0..1u64 << n {
        let x = LatticeState::from_value(value, n)?;
        let want = x.cell(pair.0) ^ x.cell(pair.1);
        let trace = run_reservoir(&x, rule, m)?;
        candidates.retain(|a| trace.bit(*a) == want);
        if candidates.is_empty() {
            break;
        }
    }
    Ok(candidates)
}

/// Input cell pairs `(a, b)`, `a < b`, whose XOR the element computes.
pub fn xor_pairs_for_element(
    rule: &Rule,
    n: usize,
    m: usize,
    element: Address,
) -> Result<Vec<(usize, usize)>> {
    check_sweep_width(n)?;
    element.check(n, m)?;
    let traces = (0..1u64 << n)
        .map(|v| {
            let x = LatticeState::from_value(v, n)?;
            Ok((x, run_reservoir(&x, rule, m)?.bit(element)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if traces.iter().all(|(x, s)| (x.cell(a) ^ x.cell(b)) == *s) {
                pairs.push((a, b));
            }
        }
    }
    Ok(pairs)
}

fn check_pair(n: usize, (a, b): (usize, usize)) -> Result<()> {
    if a == b || !(1..=n).contains(&a) || !(1..=n).contains(&b) {
        return Err(CmorError::domain(format!(
            "bit pair ({a},{b}) must name two distinct cells in 1..={n}"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XorRow {
    pub bit_a: bool,
    pub bit_b: bool,
    pub input: u64,
    pub g_sigma: f64,
    pub class: Class,
}

#[derive(Clone, Debug, PartialEq)]
pub struct XorTable {
    pub pair: (usize, usize),
    /// Rows in order (0,0), (0,1), (1,0), (1,1).
    pub rows: [XorRow; 4],
}

impl XorTable {
    /// True when the positive class marks exactly the rows where `f` holds.
    pub fn realizes(&self, f: impl Fn(bool, bool) -> bool) -> bool {
        self.rows
            .iter()
            .all(|r| (r.class == Class::Positive) == f(r.bit_a, r.bit_b))
    }

    pub fn is_xor(&self) -> bool {
        self.realizes(|a, b| a ^ b)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bit_a", "bit_b", "input", "g_sigma_siemens", "class", "xor"])?;
        for r in &self.rows {
            w.write_record([
                u8::from(r.bit_a).to_string(),
                u8::from(r.bit_b).to_string(),
                r.input.to_string(),
                format!("{:.8e}", r.g_sigma),
                r.class.label().to_string(),
                u8::from(r.bit_a ^ r.bit_b).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Drive cells `pair` through all four combinations with every other cell
/// held at `fixed_bits` (listed in ascending cell order) and classify.
pub fn xor_experiment(
    rule: &Rule,
    bank: &CrossbarBank,
    pair: (usize, usize),
    fixed_bits: &[bool],
) -> Result<XorTable> {
    let n = bank.n();
    check_pair(n, pair)?;
    if fixed_bits.len() != n - 2 {
        return Err(CmorError::domain(format!(
            "expected {} fixed bits, got {}",
            n - 2,
            fixed_bits.len()
        )));
    }
    let mut base = LatticeState::zeros(n)?;
    let mut fixed = fixed_bits.iter();
    for cell in (1..=n).filter(|&c| c != pair.0 && c != pair.1) {
        base = base.with_cell(cell, *fixed.next().expect("length checked"));
    }
    let combos = [(false, false), (false, true), (true, false), (true, true)];
    let mut rows = Vec::with_capacity(4);
    for (a, b) in combos {
        let x = base.with_cell(pair.0, a).with_cell(pair.1, b);
        let trace = run_reservoir(&x, rule, bank.m())?;
        let g_sigma = bank.read_conductance(&trace)?;
        rows.push(XorRow {
            bit_a: a,
            bit_b: b,
            input: x.value(),
            g_sigma,
            class: bank.classify(&trace)?,
        });
    }
    Ok(XorTable {
        pair,
        rows: rows.try_into().expect("four rows"),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub address_a: Address,
    pub address_b: Address,
    /// Gap-cluster index for every input of the sweep.
    pub cluster_assignments: Vec<usize>,
    pub clusters: Vec<SampleSummary>,
    /// Inputs with only `address_a` enabled.
    pub only_a: SampleSummary,
    pub only_b: SampleSummary,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

impl LevelStats {
    pub fn significant(&self) -> bool {
        self.p_value < LEVEL_ALPHA
    }
}

/// Compare the conductance of inputs that enable only `a` with inputs that
/// enable only `b` (equal-variance two-sample t-test).
pub fn level_ttest(
    result: &SweepResult,
    address_a: Address,
    address_b: Address,
    lrs_nominal: f64,
) -> Result<LevelStats> {
    if address_a == address_b {
        return Err(CmorError::domain(
            "level comparison needs two distinct addresses",
        ));
    }
    let col_a = result.enabled_column(address_a)?;
    let col_b = result.enabled_column(address_b)?;
    let pick = |first: usize, second: usize| -> Vec<f64> {
        result
            .records
            .iter()
            .filter(|r| r.enabled[first] && !r.enabled[second])
            .map(|r| r.g_sigma)
            .collect()
    };
    let only_a = pick(col_a, col_b);
    let only_b = pick(col_b, col_a);
    let (Some(sum_a), Some(sum_b)) = (SampleSummary::of(&only_a), SampleSummary::of(&only_b))
    else {
        return Err(CmorError::InsufficientData(format!(
            "{} inputs enable only {address_a}, {} enable only {address_b}",
            only_a.len(),
            only_b.len()
        )));
    };
    let test = pooled_t_test(&only_a, &only_b)?;
    let clusters = sweep_clusters(result, lrs_nominal);
    Ok(LevelStats {
        address_a,
        address_b,
        cluster_assignments: clusters.assignments,
        clusters: clusters.summaries,
        only_a: sum_a,
        only_b: sum_b,
        t: test.t,
        df: test.df,
        p_value: test.p_value,
    })
}
