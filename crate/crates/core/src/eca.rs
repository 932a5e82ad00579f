// SPDX-License-Identifier: Apache-2.0

//! Elementary cellular automata on a ring.
//!
//! Cells are numbered `1..=n` from the left of a printed state. The lattice is
//! packed into a `u64` with cell 1 in the most significant of the `n` used
//! bits, so the integer value of a state is the binary number read off its
//! printed form. The neighborhood `(left, center, right)` selects rule bit
//! `4*left + 2*center + right` (Wolfram numbering).

use std::fmt;
use std::str::FromStr;

use crate::error::{CmorError, Result};

/// Largest ring the packed representation holds.
pub const MAX_CELLS: usize = 64;

/// Smallest ring with three distinct neighbors per cell.
pub const MIN_CELLS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    number: u8,
    table: [bool; 8],
}

impl Rule {
    pub fn new(number: u8) -> Self {
        let mut table = [false; 8];
        for (k, out) in table.iter_mut().enumerate() {
            *out = (number >> k) & 1 == 1;
        }
        Rule { number, table }
    }

    /// Decode a rule number, rejecting anything outside `0..=255`.
    pub fn decode(number: i64) -> Result<Self> {
        u8::try_from(number)
            .map(Rule::new)
            .map_err(|_| CmorError::domain(format!("rule number {number} is outside 0..=255")))
    }

    pub fn number(&self) -> u8 {
        self.number
    }

    /// Truth table indexed by neighborhood value `4l + 2c + r`.
    pub fn table(&self) -> &[bool; 8] {
        &self.table
    }

    /// Re-encode the truth table into a rule number.
    pub fn encode(&self) -> u8 {
        self.table
            .iter()
            .enumerate()
            .fold(0u8, |acc, (k, &b)| acc | (u8::from(b) << k))
    }

    pub fn output(&self, left: bool, center: bool, right: bool) -> bool {
        self.table[(usize::from(left) << 2) | (usize::from(center) << 1) | usize::from(right)]
    }

    /// True when complementing every cell of a neighborhood leaves the output
    /// unchanged, so `x` and `!x` always step to the same state.
    pub fn is_bit_flip_symmetric(&self) -> bool {
        (0..8).all(|k| self.table[k] == self.table[7 - k])
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}", self.number)
    }
}

/// The eight rules fabricated as 8x7 circuits.
pub const CIRCUIT_RULES: [u8; 8] = [60, 90, 102, 105, 153, 165, 180, 195];

/// One generation of an `n`-cell ring.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeState {
    bits: u64,
    n: usize,
}

fn width_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_width(n: usize) -> Result<()> {
    if (MIN_CELLS..=MAX_CELLS).contains(&n) {
        Ok(())
    } else {
        Err(CmorError::domain(format!(
            "lattice width {n} is outside {MIN_CELLS}..={MAX_CELLS}"
        )))
    }
}

impl LatticeState {
    pub fn zeros(n: usize) -> Result<Self> {
        check_width(n)?;
        Ok(LatticeState { bits: 0, n })
    }

    pub fn ones(n: usize) -> Result<Self> {
        check_width(n)?;
        Ok(LatticeState {
            bits: width_mask(n),
            n,
        })
    }

    /// Build a state from its integer value; cell 1 is the most significant bit.
    pub fn from_value(value: u64, n: usize) -> Result<Self> {
        check_width(n)?;
        if value & !width_mask(n) != 0 {
            return Err(CmorError::domain(format!(
                "value {value} does not fit in {n} cells"
            )));
        }
        Ok(LatticeState { bits: value, n })
    }

    /// Build a state from cell values listed left to right.
    pub fn from_cells(cells: &[bool]) -> Result<Self> {
        check_width(cells.len())?;
        let bits = cells.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        Ok(LatticeState {
            bits,
            n: cells.len(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> u64 {
        self.bits
    }

    /// State of cell `cell` (1-based). Panics when out of range.
    pub fn cell(&self, cell: usize) -> bool {
        assert!(
            (1..=self.n).contains(&cell),
            "cell {cell} outside 1..={}",
            self.n
        );
        (self.bits >> (self.n - cell)) & 1 == 1
    }

    pub fn with_cell(mut self, cell: usize, value: bool) -> Self {
        assert!((1..=self.n).contains(&cell));
        let bit = 1u64 << (self.n - cell);
        if value {
            self.bits |= bit;
        } else {
            self.bits &= !bit;
        }
        self
    }

    pub fn cells(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.n).map(move |c| self.cell(c))
    }

    pub fn complement(&self) -> Self {
        LatticeState {
            bits: !self.bits & width_mask(self.n),
            n: self.n,
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Rotate the ring so that cell `i` moves to cell `i - k` (mod n).
    pub fn rotate_left(&self, k: usize) -> Self {
        let k = k % self.n;
        if k == 0 {
            return *self;
        }
        let mask = width_mask(self.n);
        LatticeState {
            bits: ((self.bits << k) | (self.bits >> (self.n - k))) & mask,
            n: self.n,
        }
    }

    pub fn rotate_right(&self, k: usize) -> Self {
        let k = k % self.n;
        self.rotate_left(self.n - k)
    }
}

impl fmt::Display for LatticeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.cells() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for LatticeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatticeState({self})")
    }
}

impl FromStr for LatticeState {
    type Err = CmorError;

    fn from_str(s: &str) -> Result<Self> {
        let cells = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CmorError::domain(format!(
                    "unexpected character {other:?} in lattice state"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        LatticeState::from_cells(&cells)
    }
}

/// Advance every cell of the ring by one generation.
///
/// Works on all cells at once: for each neighborhood whose rule bit is set,
/// build the mask of cells currently seeing that neighborhood and OR it in.
pub fn step(state: &LatticeState, rule: &Rule) -> LatticeState {
    let n = state.n;
    let mask = width_mask(n);
    let center = state.bits;
    // Cell i sits at bit n - i, so its left neighbor is one bit higher.
    let left = state.rotate_right(1).bits;
    let right = state.rotate_left(1).bits;

    let mut next = 0u64;
    for (k, &on) in rule.table.iter().enumerate() {
        if !on {
            continue;
        }
        let l = if k & 4 != 0 { left } else { !left };
        let c = if k & 2 != 0 { center } else { !center };
        let r = if k & 1 != 0 { right } else { !right };
        next |= l & c & r;
    }
    LatticeState {
        bits: next & mask,
        n,
    }
}

/// Generations `1..=m` of an automaton started from some input.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReservoirTrace {
    rows: Vec<LatticeState>,
    n: usize,
}

impl ReservoirTrace {
    /// Assemble a trace from explicit rows, oldest generation first.
    pub fn from_rows(rows: Vec<LatticeState>) -> Result<Self> {
        let n = rows
            .first()
            .map(LatticeState::n)
            .ok_or_else(|| CmorError::domain("a trace needs at least one generation"))?;
        if rows.iter().any(|r| r.n() != n) {
            return Err(CmorError::domain("trace rows differ in width"));
        }
        Ok(ReservoirTrace { rows, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[LatticeState] {
        &self.rows
    }

    /// Row for generation `iteration` (1-based).
    pub fn generation(&self, iteration: usize) -> Option<&LatticeState> {
        iteration.checked_sub(1).and_then(|i| self.rows.get(i))
    }

    /// Logical state of one element of the unrolled automaton.
    pub fn cell_state(&self, iteration: usize, cell: usize) -> Result<bool> {
        if !(1..=self.m()).contains(&iteration) || !(1..=self.n).contains(&cell) {
            return Err(CmorError::Address {
                iteration,
                cell,
                m: self.m(),
                n: self.n,
            });
        }
        Ok(self.rows[iteration - 1].cell(cell))
    }

    /// Unchecked variant for hot loops over known-good addresses.
    pub(crate) fn bit(&self, address: Address) -> bool {
        self.rows[address.iteration - 1].cell(address.cell)
    }

    /// Flatten iteration-major, cell-minor into 0/1 values.
    pub fn flatten(&self) -> Vec<u8> {
        self.rows
            .iter()
            .flat_map(|r| r.cells().map(u8::from))
            .collect()
    }
}

impl fmt::Display for ReservoirTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

impl FromStr for ReservoirTrace {
    type Err = CmorError;

    fn from_str(s: &str) -> Result<Self> {
        let rows = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(LatticeState::from_str)
            .collect::<Result<Vec<_>>>()?;
        ReservoirTrace::from_rows(rows)
    }
}

/// Run `m` generations from `input`. The input itself is not part of the trace.
pub fn run_reservoir(input: &LatticeState, rule: &Rule, m: usize) -> Result<ReservoirTrace> {
    run_reservoir_with(input, rule, m, step)
}

/// Same as [`run_reservoir`] but with a caller-supplied update function.
pub fn run_reservoir_with<F>(
    input: &LatticeState,
    rule: &Rule,
    m: usize,
    mut stepper: F,
) -> Result<ReservoirTrace>
where
    F: FnMut(&LatticeState, &Rule) -> LatticeState,
{
    if m == 0 {
        return Err(CmorError::domain("reservoir depth m must be at least 1"));
    }
    let mut rows = Vec::with_capacity(m);
    let mut current = *input;
    for _ in 0..m {
        current = stepper(&current, rule);
        rows.push(current);
    }
    Ok(ReservoirTrace { rows, n: input.n() })
}

/// Element address in the unrolled automaton: generation row and cell column,
/// both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    pub iteration: usize,
    pub cell: usize,
}

impl Address {
    pub const fn new(iteration: usize, cell: usize) -> Self {
        Address { iteration, cell }
    }

    pub fn check(&self, n: usize, m: usize) -> Result<()> {
        if (1..=m).contains(&self.iteration) && (1..=n).contains(&self.cell) {
            Ok(())
        } else {
            Err(CmorError::Address {
                iteration: self.iteration,
                cell: self.cell,
                m,
                n,
            })
        }
    }

    /// Position in the iteration-major flattening of an `n`-wide array.
    pub fn flat_index(&self, n: usize) -> usize {
        (self.iteration - 1) * n + (self.cell - 1)
    }

    pub fn from_flat_index(index: usize, n: usize) -> Self {
        Address {
            iteration: index / n + 1,
            cell: index % n + 1,
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.iteration, self.cell)
    }
}

/// Accepts `2:7`, `2,7` or `(2,7)`.
impl FromStr for Address {
    type Err = CmorError;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut parts = inner.split([':', ',']).map(str::trim);
        let bad = || CmorError::domain(format!("malformed address {s:?}"));
        let iteration = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let cell = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Address { iteration, cell })
    }
}
