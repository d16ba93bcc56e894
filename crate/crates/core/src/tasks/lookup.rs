//! Computation phases compiled from a register lookup table.
//!
//! The on-board head makes one full sweep of its ring as a step counter:
//!
//! 1. `p=0, t=0`: write a marker, enter `p=1`, step right.
//! 2. `p=1, t=0`: step right.
//! 3. `p=1, t=1`: erase the marker back at `k=0`, enter `p=2`.
//! 4. `p=2`: read `(o, m, s)`, set `m ← o`, `o ← table(o, m, s)`, return to
//!    `p=0` and flip the control qubit.
//!
//! Every computation therefore takes `N + 2` steps and ends in the rest frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;
use crate::rules::{LocalRule, Phase, RuleMatch, RuleOutcome, RuleSet};

/// Head states used by the sweep.
pub const SWEEP_HEAD_STATES: usize = 3;

/// Total map `(l2, l1, s) -> l3` over `[0, L) × [0, L) × {0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct LookupTable {
    registers: usize,
    entries: Vec<usize>,
}

/// Serialized form: `[l2, l1, s, l3]` rows.
#[derive(Serialize, Deserialize)]
struct RawTable {
    registers: usize,
    entries: Vec<[usize; 4]>,
}

impl TryFrom<RawTable> for LookupTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        let mut entries = Vec::with_capacity(raw.entries.len());
        for [l2, l1, s, l3] in raw.entries {
            if s > 1 {
                return Err(Error::Task(format!("lookup entry has s = {s}")));
            }
            entries.push(((l2, l1, s as u8), l3));
        }
        LookupTable::from_entries(raw.registers, entries)
    }
}

impl From<LookupTable> for RawTable {
    fn from(t: LookupTable) -> Self {
        let mut entries = Vec::with_capacity(t.entries.len());
        for l2 in 0..t.registers {
            for l1 in 0..t.registers {
                for s in 0..2u8 {
                    entries.push([l2, l1, s as usize, t.get(l2, l1, s)]);
                }
            }
        }
        RawTable {
            registers: t.registers,
            entries,
        }
    }
}

impl LookupTable {
    fn slot(registers: usize, l2: usize, l1: usize, s: u8) -> usize {
        (l2 * registers + l1) * 2 + s as usize
    }

    pub fn from_fn<F>(registers: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, u8) -> usize,
    {
        let mut entries = Vec::with_capacity(registers * registers * 2);
        for l2 in 0..registers {
            for l1 in 0..registers {
                for s in 0..2u8 {
                    entries.push(((l2, l1, s), f(l2, l1, s)));
                }
            }
        }
        Self::from_entries(registers, entries)
    }

    /// Fails unless every `(l2, l1, s)` is given exactly once with an
    /// in-range value.
    pub fn from_entries<I>(registers: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize, u8), usize)>,
    {
        if registers == 0 {
            return Err(Error::Task(
                "lookup table needs at least one register value".into(),
            ));
        }
        let mut table = vec![None; registers * registers * 2];
        for ((l2, l1, s), l3) in entries {
            if l2 >= registers || l1 >= registers || s > 1 || l3 >= registers {
                return Err(Error::Task(format!(
                    "lookup entry ({l2}, {l1}, {s}) -> {l3} outside [0, {registers})"
                )));
            }
            let slot = &mut table[Self::slot(registers, l2, l1, s)];
            if slot.replace(l3).is_some() {
                return Err(Error::Task(format!(
                    "duplicate lookup entry ({l2}, {l1}, {s})"
                )));
            }
        }
        let mut entries = Vec::with_capacity(table.len());
        for l2 in 0..registers {
            for l1 in 0..registers {
                for s in 0..2u8 {
                    match table[Self::slot(registers, l2, l1, s)] {
                        Some(v) => entries.push(v),
                        None => return Err(Error::LookupNotTotal { l2, l1, s }),
                    }
                }
            }
        }
        Ok(Self { registers, entries })
    }

    pub fn registers(&self) -> usize {
        self.registers
    }

    pub fn get(&self, l2: usize, l1: usize, s: u8) -> usize {
        self.entries[Self::slot(self.registers, l2, l1, s)]
    }
}

/// Computation rule set realizing `table` on `geometry`.
pub fn compile_lookup_computation(table: &LookupTable, g: &LatticeGeometry) -> Result<RuleSet> {
    if g.register_dim() != table.registers() {
        return Err(Error::Task(format!(
            "lookup table has {} register values but the geometry has L = {}",
            table.registers(),
            g.register_dim()
        )));
    }
    if g.head_states() < SWEEP_HEAD_STATES {
        return Err(Error::Task(format!(
            "lookup computation needs at least {SWEEP_HEAD_STATES} head states"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let mut rules = vec![
        LocalRule::computation(
            RuleMatch::any().p(0).t(0),
            RuleOutcome::stay().p(1).t(1).dk(1),
            one,
        ),
        LocalRule::computation(RuleMatch::any().p(1).t(0), RuleOutcome::stay().dk(1), one),
        LocalRule::computation(
            RuleMatch::any().p(1).t(1),
            RuleOutcome::stay().p(2).t(0),
            one,
        ),
    ];
    let l = table.registers();
    for l2 in 0..l {
        for l1 in 0..l {
            for s in 0..2u8 {
                rules.push(LocalRule::computation(
                    RuleMatch::any().p(2).output(l2).memory(l1).s(s),
                    RuleOutcome::stay()
                        .p(0)
                        .registers(l2, table.get(l2, l1, s))
                        .flip(),
                    one,
                ));
            }
        }
    }
    RuleSet::new(Phase::Computation, rules)
}
