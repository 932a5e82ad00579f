// SPDX-License-Identifier: Apache-2.0

//! Training the crossbar readout.
//!
//! A soft-margin linear SVM is fit on the unrolled reservoir traces by
//! full-batch hinge-loss subgradient descent. The real-valued hyperplane is
//! then projected onto what the crossbar can hold: non-negative weights
//! rounded onto the device level table, with the bias replaced by a
//! threshold conductance placed in the middle of the class gap.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::eca::{run_reservoir, Address, LatticeState, Rule};
use crate::error::{CmorError, Result};
use crate::reram::{threshold_class, Class, CrossbarBank, DeviceParams};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    items: Vec<(LatticeState, Class)>,
}

impl LabeledDataset {
    pub fn new(items: Vec<(LatticeState, Class)>) -> Result<Self> {
        if let Some((first, _)) = items.first() {
            let n = first.n();
            if items.iter().any(|(x, _)| x.n() != n) {
                return Err(CmorError::domain("dataset inputs differ in width"));
            }
        }
        Ok(LabeledDataset { items })
    }

    pub fn items(&self) -> &[(LatticeState, Class)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n(&self) -> Option<usize> {
        self.items.first().map(|(x, _)| x.n())
    }

    pub fn labels(&self) -> Vec<Class> {
        self.items.iter().map(|(_, y)| *y).collect()
    }

    /// Every `n`-bit input, labeled by the XOR of cells `a` and `b`.
    pub fn xor_task(n: usize, a: usize, b: usize) -> Result<Self> {
        if n > 20 {
            return Err(CmorError::Refused(format!(
                "2^{n} inputs is too many to list"
            )));
        }
        if a == b || !(1..=n).contains(&a) || !(1..=n).contains(&b) {
            return Err(CmorError::domain(format!(
                "invalid bit pair ({a},{b}) for n={n}"
            )));
        }
        let items = (0..1u64 << n)
            .map(|v| {
                let x = LatticeState::from_value(v, n)?;
                Ok((x, Class::from_sign(x.cell(a) ^ x.cell(b))))
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledDataset::new(items)
    }

    /// One item per line: `n` characters of `0`/`1`, whitespace, `+1` or `-1`.
    /// Blank lines and `#` comments are skipped.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, y) in &self.items {
            let _ = writeln!(out, "{x} {}", y.label());
        }
        out
    }
}

impl FromStr for LabeledDataset {
    type Err = CmorError;

    fn from_str(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(bits), Some(label), None) = (fields.next(), fields.next(), fields.next())
            else {
                return Err(CmorError::parse(idx + 1, "expected `<bits> <+1|-1>`"));
            };
            let x: LatticeState = bits
                .parse()
                .map_err(|e: CmorError| CmorError::parse(idx + 1, e.to_string()))?;
            let y: Class = label
                .parse()
                .map_err(|e: CmorError| CmorError::parse(idx + 1, e.to_string()))?;
            if let Some((first, _)) = items.first() {
                if LatticeState::n(first) != x.n() {
                    return Err(CmorError::parse(
                        idx + 1,
                        "input width differs from first line",
                    ));
                }
            }
            items.push((x, y));
        }
        LabeledDataset::new(items)
    }
}

/// Flattened traces, one row of `n * m` gate values per dataset item.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    m: usize,
    rows: Vec<Vec<u8>>,
}

impl FeatureMatrix {
    pub fn from_rows(n: usize, m: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        if rows
            .iter()
            .any(|r| r.len() != n * m || r.iter().any(|&v| v > 1))
        {
            return Err(CmorError::domain(format!(
                "feature rows must hold {} binary values",
                n * m
            )));
        }
        Ok(FeatureMatrix { n, m, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> usize {
        self.n * self.m
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }
}

pub fn featurize(dataset: &LabeledDataset, rule: &Rule, m: usize) -> Result<FeatureMatrix> {
    let n = dataset
        .n()
        .ok_or_else(|| CmorError::domain("cannot featurize an empty dataset"))?;
    let rows = dataset
        .items()
        .iter()
        .map(|(x, _)| run_reservoir(x, rule, m).map(|t| t.flatten()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix { n, m, rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HingeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    /// Slack allowed on the unit-margin constraints when judging convergence.
    pub tolerance: f64,
    /// Project weights onto `w >= 0` after every step, matching a single-ended
    /// crossbar that cannot hold negative conductance.
    pub nonnegative: bool,
}

impl Default for HingeConfig {
    fn default() -> Self {
        HingeConfig {
            epochs: 5000,
            learning_rate: 0.1,
            l2: 0.01,
            tolerance: 1e-3,
            nonnegative: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Regularized objective at the returned iterate.
    pub objective: f64,
    /// Every item meets `y (w.x - b) >= 1 - tolerance` at the returned iterate.
    pub converged: bool,
}

impl LinearModel {
    pub fn decision(&self, row: &[u8]) -> f64 {
        dot(&self.weights, row) - self.bias
    }

    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[Class]) -> f64 {
        let hits = features
            .rows()
            .iter()
            .zip(labels)
            .filter(|(row, &y)| Class::from_sign(self.decision(row) > 0.0) == y)
            .count();
        hits as f64 / labels.len().max(1) as f64
    }
}

fn dot(w: &[f64], row: &[u8]) -> f64 {
    w.iter()
        .zip(row)
        .filter(|(_, &x)| x != 0)
        .map(|(w, _)| w)
        .sum()
}

fn sign(y: Class) -> f64 {
    f64::from(y.as_i8())
}

fn hinge_objective(w: &[f64], b: f64, features: &FeatureMatrix, labels: &[Class], l2: f64) -> f64 {
    let loss: f64 = features
        .rows()
        .iter()
        .zip(labels)
        .map(|(row, &y)| (1.0 - sign(y) * (dot(w, row) - b)).max(0.0))
        .sum::<f64>()
        / labels.len() as f64;
    loss + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Minimize `l2/2 |w|^2 + mean_i max(0, 1 - y_i (w.x_i - b))` by full-batch
/// subgradient descent at a fixed step size, keeping the best iterate seen.
pub fn train_linear(
    features: &FeatureMatrix,
    labels: &[Class],
    config: &HingeConfig,
) -> Result<LinearModel> {
    if features.rows().is_empty() {
        return Err(CmorError::domain("cannot train on an empty feature set"));
    }
    if features.rows().len() != labels.len() {
        return Err(CmorError::domain(format!(
            "{} feature rows but {} labels",
            features.rows().len(),
            labels.len()
        )));
    }
    let d = features.width();
    let count = labels.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best_w = w.clone();
    let mut best_b = b;
    let mut best_obj = hinge_objective(&w, b, features, labels, config.l2);
    let mut grad_w = vec![0.0; d];

    for _ in 0..config.epochs {
        grad_w
            .iter_mut()
            .zip(&w)
            .for_each(|(g, wi)| *g = config.l2 * wi);
        let mut grad_b = 0.0;
        for (row, &y) in features.rows().iter().zip(labels) {
            let ys = sign(y);
            if ys * (dot(&w, row) - b) < 1.0 {
                for (g, &x) in grad_w.iter_mut().zip(row) {
                    if x != 0 {
                        *g -= ys / count;
                    }
                }
                grad_b += ys / count;
            }
        }
        let eta = config.learning_rate;
        w.iter_mut().zip(&grad_w).for_each(|(wi, g)| *wi -= eta * g);
        if config.nonnegative {
            w.iter_mut().for_each(|wi| *wi = wi.max(0.0));
        }
        b -= eta * grad_b;

        let obj = hinge_objective(&w, b, features, labels, config.l2);
        if obj < best_obj {
            best_obj = obj;
            best_w.clone_from(&w);
            best_b = b;
        }
    }

    let converged = features
        .rows()
        .iter()
        .zip(labels)
        .all(|(row, &y)| sign(y) * (dot(&best_w, row) - best_b) >= 1.0 - config.tolerance);
    Ok(LinearModel {
        weights: best_w,
        bias: best_b,
        objective: best_obj,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlanWrite {
    pub address: Address,
    pub level: usize,
}

/// Device writes plus the comparator threshold that realize a classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgrammingPlan {
    pub n: usize,
    pub m: usize,
    /// Sorted by address, no duplicates, levels >= 1.
    pub writes: Vec<PlanWrite>,
    pub g_b: f64,
    /// Training-set accuracy of the plan on a simulated bank.
    pub achieved_accuracy: f64,
    /// Some class overlap remained after quantization.
    pub separability_warning: bool,
}

impl ProgrammingPlan {
    /// Program `writes` into a bank and set its threshold.
    pub fn apply(&self, bank: &mut CrossbarBank) -> Result<()> {
        if bank.n() != self.n || bank.m() != self.m {
            return Err(CmorError::Dimension {
                expected_n: self.n,
                expected_m: self.m,
                n: bank.n(),
                m: bank.m(),
            });
        }
        for w in &self.writes {
            bank.program(w.address, w.level)?;
        }
        bank.set_g_b(self.g_b)
    }

    /// Build a fresh bank from `params` and apply the plan to it.
    pub fn realize(&self, params: &DeviceParams) -> Result<CrossbarBank> {
        let mut bank = CrossbarBank::new(self.n, self.m, params.clone(), self.g_b)?;
        self.apply(&mut bank)?;
        Ok(bank)
    }

    /// Accuracy of the plan on `params` hardware over a featurized dataset.
    pub fn replay_accuracy(
        &self,
        params: &DeviceParams,
        features: &FeatureMatrix,
        labels: &[Class],
    ) -> Result<f64> {
        let bank = self.realize(params)?;
        let reads = read_all(&bank, features)?;
        Ok(accuracy_at(&reads, labels, self.g_b))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# cmor programming plan\n");
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "m={}", self.m);
        let _ = writeln!(out, "g_b={:e}", self.g_b);
        let _ = writeln!(out, "achieved_accuracy={}", self.achieved_accuracy);
        out.push_str("# <iteration> <cell> <level>\n");
        for w in &self.writes {
            let _ = writeln!(
                out,
                "{} {} {}",
                w.address.iteration, w.address.cell, w.level
            );
        }
        out
    }
}

impl FromStr for ProgrammingPlan {
    type Err = CmorError;

    fn from_str(text: &str) -> Result<Self> {
        let (mut n, mut m, mut g_b, mut acc) = (None, None, None, None);
        let mut writes: Vec<PlanWrite> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| CmorError::parse(line_no, msg);
            if let Some((key, value)) = line.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "n" => {
                        n = Some(
                            value
                                .parse::<usize>()
                                .map_err(|e| perr(format!("n: {e}")))?,
                        )
                    }
                    "m" => {
                        m = Some(
                            value
                                .parse::<usize>()
                                .map_err(|e| perr(format!("m: {e}")))?,
                        )
                    }
                    "g_b" => {
                        g_b = Some(
                            value
                                .parse::<f64>()
                                .map_err(|e| perr(format!("g_b: {e}")))?,
                        )
                    }
                    "achieved_accuracy" => {
                        acc = Some(
                            value
                                .parse::<f64>()
                                .map_err(|e| perr(format!("accuracy: {e}")))?,
                        )
                    }
                    other => return Err(perr(format!("unknown key {other:?}"))),
                }
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| perr(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let [iteration, cell, level] = nums[..] else {
                return Err(perr("expected `<iteration> <cell> <level>`".into()));
            };
            if level == 0 {
                return Err(perr("plan writes must have level >= 1".into()));
            }
            let address = Address::new(iteration, cell);
            if writes.iter().any(|w| w.address == address) {
                return Err(perr(format!("duplicate address {address}")));
            }
            writes.push(PlanWrite { address, level });
        }
        let n = n.ok_or_else(|| CmorError::parse(0, "missing n"))?;
        let m = m.ok_or_else(|| CmorError::parse(0, "missing m"))?;
        for w in &writes {
            w.address.check(n, m)?;
        }
        writes.sort();
        let g_b = g_b.ok_or_else(|| CmorError::parse(0, "missing g_b"))?;
        if !(g_b.is_finite() && g_b >= 0.0) {
            return Err(CmorError::domain("plan threshold must be non-negative"));
        }
        let achieved_accuracy = acc.unwrap_or(f64::NAN);
        Ok(ProgrammingPlan {
            n,
            m,
            writes,
            g_b,
            achieved_accuracy,
            separability_warning: achieved_accuracy < 1.0,
        })
    }
}

fn read_all(bank: &CrossbarBank, features: &FeatureMatrix) -> Result<Vec<f64>> {
    features.rows().iter().map(|r| bank.read_flat(r)).collect()
}

fn accuracy_at(reads: &[f64], labels: &[Class], g_b: f64) -> f64 {
    let hits = reads
        .iter()
        .zip(labels)
        .filter(|(&g, &y)| threshold_class(g, g_b) == y)
        .count();
    hits as f64 / labels.len().max(1) as f64
}

/// Threshold halfway across the gap between the classes, and whether that gap
/// is non-empty.
fn midpoint_threshold(reads: &[f64], labels: &[Class]) -> (f64, bool) {
    let max_neg = reads
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == Class::Negative)
        .map(|(&g, _)| g)
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.max(g)))
        });
    let min_pos = reads
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == Class::Positive)
        .map(|(&g, _)| g)
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.min(g)))
        });
    match (max_neg, min_pos) {
        (Some(neg), Some(pos)) => (0.5 * (neg + pos), neg < pos),
        (Some(neg), None) => (neg, true),
        (None, Some(pos)) => (0.5 * pos, pos > 0.0),
        (None, None) => (0.0, true),
    }
}

fn plan_from_levels(
    levels: &[usize],
    features: &FeatureMatrix,
    labels: &[Class],
    params: &DeviceParams,
) -> Result<ProgrammingPlan> {
    let n = features.n();
    let m = features.m();
    let writes: Vec<PlanWrite> = levels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0)
        .map(|(i, &level)| PlanWrite {
            address: Address::from_flat_index(i, n),
            level,
        })
        .collect();
    let mut plan = ProgrammingPlan {
        n,
        m,
        writes,
        g_b: 0.0,
        achieved_accuracy: 0.0,
        separability_warning: false,
    };
    let bank = plan.realize(params)?;
    let reads = read_all(&bank, features)?;
    let (g_b, separable) = midpoint_threshold(&reads, labels);
    plan.g_b = g_b;
    plan.achieved_accuracy = accuracy_at(&reads, labels, g_b);
    plan.separability_warning = !separable;
    Ok(plan)
}

/// Index of the level nearest `target`; exact ties go to the lower level.
fn nearest_level(table: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, &g) in table.iter().enumerate().skip(1) {
        if (g - target).abs() < (table[best] - target).abs() {
            best = i;
        }
    }
    best
}

/// Project a real hyperplane onto the crossbar.
///
/// Negative weights clamp to zero, the largest weight maps to the top level
/// and every other weight rounds to its nearest level. The bias is replaced
/// by a threshold at the midpoint of the class gap measured on a bank built
/// from `params`. While training accuracy is below 1, the best single-device
/// level move (one step up or down) is taken as long as it strictly improves
/// accuracy. Finally, writes whose removal does not lower training accuracy
/// are dropped, weakest first.
pub fn quantize_plan(
    weights: &[f64],
    _bias: f64,
    features: &FeatureMatrix,
    labels: &[Class],
    params: &DeviceParams,
) -> Result<ProgrammingPlan> {
    if weights.len() != features.width() {
        return Err(CmorError::domain(format!(
            "expected {} weights, got {}",
            features.width(),
            weights.len()
        )));
    }
    if features.rows().len() != labels.len() || labels.is_empty() {
        return Err(CmorError::domain(
            "features and labels must be non-empty and aligned",
        ));
    }
    params.validate()?;
    let table = params.level_table();
    let top = table[table.len() - 1];
    let w_max = weights.iter().cloned().fold(0.0, f64::max);
    let mut levels: Vec<usize> = if w_max > 0.0 {
        weights
            .iter()
            .map(|&w| nearest_level(&table, w.max(0.0) / w_max * top))
            .collect()
    } else {
        vec![0; weights.len()]
    };

    let mut plan = plan_from_levels(&levels, features, labels, params)?;

    // Hill-climb on single-device level moves while accuracy strictly improves.
    let top_index = table.len() - 1;
    while plan.achieved_accuracy < 1.0 {
        let mut best: Option<(usize, usize, ProgrammingPlan)> = None;
        for i in 0..levels.len() {
            let current = levels[i];
            let moves = [
                current.checked_sub(1),
                (current < top_index).then_some(current + 1),
            ];
            for next in moves.into_iter().flatten() {
                levels[i] = next;
                let candidate = plan_from_levels(&levels, features, labels, params)?;
                let bar = best
                    .as_ref()
                    .map_or(plan.achieved_accuracy, |b| b.2.achieved_accuracy);
                if candidate.achieved_accuracy > bar {
                    best = Some((i, next, candidate));
                }
            }
            levels[i] = current;
        }
        match best {
            Some((i, next, candidate)) => {
                levels[i] = next;
                plan = candidate;
            }
            None => break,
        }
    }

    let mut order: Vec<usize> = (0..levels.len()).filter(|&i| levels[i] > 0).collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .partial_cmp(&weights[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    loop {
        let mut changed = false;
        for &i in &order {
            if levels[i] == 0 {
                continue;
            }
            let kept = levels[i];
            levels[i] = 0;
            let candidate = plan_from_levels(&levels, features, labels, params)?;
            if candidate.achieved_accuracy >= plan.achieved_accuracy {
                plan = candidate;
                changed = true;
            } else {
                levels[i] = kept;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(plan)
}

/// Largest `n * m` the exhaustive search accepts.
pub const ORACLE_MAX_DEVICES: usize = 16;

/// Best binary programming by brute force.
///
/// Every assignment of HRS/top-level to the `n * m` devices is scored in
/// ideal mode (no variation) with its best possible threshold. Among equally
/// accurate plans the lexicographically smallest level vector (iteration-major
/// order) wins.
pub fn exhaustive_oracle(
    dataset: &LabeledDataset,
    rule: &Rule,
    n: usize,
    m: usize,
    params: &DeviceParams,
) -> Result<ProgrammingPlan> {
    let devices = n * m;
    if devices > ORACLE_MAX_DEVICES {
        return Err(CmorError::Refused(format!(
            "exhaustive search over 2^{devices} programmings exceeds the 2^{ORACLE_MAX_DEVICES} limit"
        )));
    }
    if dataset.n() != Some(n) {
        return Err(CmorError::domain(format!(
            "dataset must be non-empty with width {n}"
        )));
    }
    let ideal = params.without_variation();
    ideal.validate()?;
    let features = featurize(dataset, rule, m)?;
    let labels = dataset.labels();
    let on = ideal.level_table()[ideal.top_level()];
    let off = ideal.parasitic_enabled;

    let mut best: Option<(usize, u64, f64)> = None;
    let mut reads = vec![0.0; labels.len()];
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for code in 0..(1u64 << devices) {
        let level_on = |i: usize| (code >> (devices - 1 - i)) & 1 == 1;
        for (g, row) in reads.iter_mut().zip(features.rows()) {
            *g = row
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0)
                .fold(0.0, |acc, (i, _)| acc + if level_on(i) { on } else { off });
        }
        let (hits, g_b) = best_cut(&reads, &labels, &mut order);
        if best.is_none_or(|(h, _, _)| hits > h) {
            best = Some((hits, code, g_b));
        }
    }
    let (_, code, g_b) = best.expect("at least one programming");
    let top_index = ideal.top_level();
    let levels: Vec<usize> = (0..devices)
        .map(|i| {
            if (code >> (devices - 1 - i)) & 1 == 1 {
                top_index
            } else {
                0
            }
        })
        .collect();
    let mut plan = plan_from_levels(&levels, &features, &labels, &ideal)?;
    let bank = plan.realize(&ideal)?;
    let reads = read_all(&bank, &features)?;
    plan.g_b = g_b;
    plan.achieved_accuracy = accuracy_at(&reads, &labels, g_b);
    plan.separability_warning = plan.achieved_accuracy < 1.0;
    Ok(plan)
}

/// Most correct classifications achievable by any non-negative threshold,
/// and a threshold achieving it (midpoint of the chosen gap).
fn best_cut(reads: &[f64], labels: &[Class], order: &mut [usize]) -> (usize, f64) {
    order.sort_by(|&a, &b| reads[a].partial_cmp(&reads[b]).unwrap_or(Ordering::Equal));
    let total_pos = labels.iter().filter(|&&y| y == Class::Positive).count();
    // Threshold below everything: all items read positive, valid only if the
    // smallest read is above zero.
    let lowest = reads[order[0]];
    let mut best = if lowest > 0.0 {
        (total_pos, 0.5 * lowest)
    } else {
        (0, f64::NAN)
    };
    let mut neg_below = 0;
    let mut pos_below = 0;
    let mut i = 0;
    while i < order.len() {
        let g = reads[order[i]];
        while i < order.len() && reads[order[i]] == g {
            match labels[order[i]] {
                Class::Negative => neg_below += 1,
                Class::Positive => pos_below += 1,
            }
            i += 1;
        }
        let hits = neg_below + (total_pos - pos_below);
        if hits > best.0 || best.1.is_nan() {
            let g_b = if i < order.len() {
                0.5 * (g + reads[order[i]])
            } else {
                g
            };
            best = (hits, g_b);
        }
    }
    best
}
