//! Controllers for multi-site tasks.
//!
//! A script is a list of site visits. Between visits the robot walks one
//! site per action step. Every step is a controller state `(step, carry)`
//! whose code lives in the output register; `carry` holds bits picked up
//! from the environment. The lookup table advances the controller and only
//! accepts contexts whose memory register holds a genuine predecessor;
//! anything else falls back to the start code, which has no action.
//!
//! Carried bits are always dropped again by re-reading a site that holds a
//! copy, so the finished robot state does not depend on the input.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rules::{LocalRule, Phase, RuleMatch, RuleOutcome, RuleSet};

use super::lookup::LookupTable;

/// One stop on the itinerary. Entry operations run during the computation
/// that precedes the visit (reading the qubit under the robot); the write
/// runs in the action phase of the visit itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Visit {
    pub pos: i64,
    /// Abort to the completion code if the qubit reads 1.
    pub check_zero: bool,
    /// Copy the qubit into carry slot `q`.
    pub load: Option<usize>,
    /// Forget carry slot `q`; the qubit must equal it.
    pub unload: Option<usize>,
    /// Write `s ^= carry[q] ^ xor_const`.
    pub xor_slot: Option<usize>,
    pub xor_const: u8,
}

impl Visit {
    pub fn at(pos: i64) -> Self {
        Self {
            pos,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Step {
    visit: Visit,
    dj: i8,
}

enum Entry {
    Done,
    Sink,
    State(u64),
}

/// Compiled controller: lookup table plus action rules.
#[derive(Clone, Debug)]
pub(crate) struct Controller {
    pub table: LookupTable,
    pub action: RuleSet,
    pub done: usize,
    /// Number of action steps in a run that does not abort.
    pub steps: usize,
}

pub(crate) const START: usize = 0;

/// Compiles `visits` (the first is the start site) with `slots` carry bits.
pub(crate) fn compile_script(visits: &[Visit], slots: usize) -> Result<Controller> {
    if visits.is_empty() {
        return Err(Error::Task("script has no visits".into()));
    }
    if slots > 8 {
        return Err(Error::Task("at most 8 carried bits are supported".into()));
    }
    let mut steps = Vec::new();
    for (i, v) in visits.iter().enumerate() {
        let next = visits.get(i + 1).map(|n| n.pos);
        let dir = next.map_or(0, |n| (n - v.pos).signum() as i8);
        steps.push(Step { visit: *v, dj: dir });
        if let Some(n) = next {
            let mut pos = v.pos + dir as i64;
            while pos != n {
                steps.push(Step {
                    visit: Visit::at(pos),
                    dj: dir,
                });
                pos += dir as i64;
            }
        }
    }

    let width = 1usize << slots;
    let code = |k: usize, carry: u64| 1 + k * width + carry as usize;
    let done = 1 + steps.len() * width;
    let sink = START;
    let registers = done + 1;

    let enter = |step: &Step, carry: u64, s: u8| -> Entry {
        let v = &step.visit;
        if v.check_zero && s == 1 {
            return Entry::Done;
        }
        let mut c = carry;
        if let Some(q) = v.load {
            c |= (s as u64) << q;
        }
        if let Some(q) = v.unload {
            if ((c >> q) & 1) as u8 != s {
                return Entry::Sink;
            }
            c &= !(1u64 << q);
        }
        Entry::State(c)
    };
    let resolve = |k: usize, e: Entry| match e {
        Entry::Done => done,
        Entry::Sink => sink,
        Entry::State(c) => code(k, c),
    };

    let mut table: BTreeMap<(usize, usize, u8), usize> = BTreeMap::new();
    let mut preds: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut carries: Vec<BTreeSet<u64>> = vec![BTreeSet::new(); steps.len()];

    for s in 0..2u8 {
        let next = resolve(0, enter(&steps[0], 0, s));
        table.insert((START, START, s), next);
        preds.entry(next).or_default().insert(START);
        if next != done && next != sink {
            carries[0].insert((next - 1) as u64 % width as u64);
        }
    }
    for k in 0..steps.len() {
        for &c in &carries[k].clone() {
            let here = code(k, c);
            let from = preds.get(&here).cloned().unwrap_or_default();
            for s in 0..2u8 {
                let next = match steps.get(k + 1) {
                    Some(step) => resolve(k + 1, enter(step, c, s)),
                    None => done,
                };
                for &m in &from {
                    table.insert((here, m, s), next);
                }
                preds.entry(next).or_default().insert(here);
                if next != done && next != sink {
                    carries[k + 1].insert(((next - 1) % width) as u64);
                }
            }
        }
    }
    let mut done_preds = preds.remove(&done).unwrap_or_default();
    done_preds.insert(done);
    for &m in &done_preds {
        for s in 0..2u8 {
            table.insert((done, m, s), done);
        }
    }
    let table = LookupTable::from_fn(registers, |l2, l1, s| {
        table.get(&(l2, l1, s)).copied().unwrap_or(sink)
    })?;

    let one = Complex64::new(1.0, 0.0);
    let mut rules = Vec::new();
    for (k, step) in steps.iter().enumerate() {
        for &c in &carries[k] {
            let out = code(k, c);
            let carried = step.visit.xor_slot.map_or(0, |q| ((c >> q) & 1) as u8);
            let flip_bit = carried ^ step.visit.xor_const;
            let moved = RuleOutcome::stay().dj(step.dj).flip();
            if flip_bit == 1 {
                for s in 0..2u8 {
                    rules.push(LocalRule::action(
                        RuleMatch::any().output(out).s(s),
                        moved.s(1 - s),
                        one,
                    ));
                }
            } else {
                rules.push(LocalRule::action(RuleMatch::any().output(out), moved, one));
            }
        }
    }
    rules.push(LocalRule::action(
        RuleMatch::any().output(done),
        super::completion_outcome(),
        one,
    ));
    Ok(Controller {
        table,
        action: RuleSet::new(Phase::Action, rules)?,
        done,
        steps: steps.len(),
    })
}
