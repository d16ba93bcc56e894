//! Built-in robot tasks compiled to rule sets.
//!
//! Rotate and search use a four-value output register whose value selects
//! the action family:
//!
//! | code | action |
//! |------|--------|
//! | 0 | start; also absorbs inconsistent register histories (no action) |
//! | 1 | rotate the local qubit |
//! | 2 | one search step |
//! | 3 | completion: idle drift to the right |
//!
//! The lookup tables only accept `(output, memory)` pairs that occur in a
//! genuine run and send everything else to code 0. Copy, cleanup and shift
//! need more controller states than four and use one register value per
//! controller state (see [`script`]).

mod lookup;
mod script;
mod trace;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BitString, Boundary, Configuration, LatticeGeometry};
use crate::rules::{
    CompileOptions, LocalRule, Phase, RuleMatch, RuleOutcome, RuleSet, StepOperator,
};
use crate::state::PRUNE;

pub use lookup::{compile_lookup_computation, LookupTable, SWEEP_HEAD_STATES};
pub use trace::{
    classical_trace, classical_trace_with, transfer_block, ClassicalTrace, StopReason,
    TransferBlock,
};

/// On-board ring size used by the built-in tasks.
pub const DEFAULT_ONBOARD: usize = 3;

pub const CODE_START: usize = 0;
pub const CODE_ROTATE: usize = 1;
pub const CODE_SEARCH: usize = 2;
pub const CODE_COMPLETE: usize = 3;
pub const STANDARD_CODES: usize = 4;

/// Environment lattice a task runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub size: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Environment {
    pub fn ring(size: usize) -> Self {
        Self {
            size,
            boundary: Boundary::Cyclic,
        }
    }
}

/// Contiguous block of `len` environment sites starting at `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteRange {
    pub start: usize,
    pub len: usize,
}

impl SiteRange {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    fn sites(&self) -> impl Iterator<Item = i64> {
        let start = self.start as i64;
        (0..self.len as i64).map(move |q| start + q)
    }
}

fn default_offset() -> usize {
    3
}

/// Task name plus parameters, as written in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "name",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum TaskParams {
    Rotate {
        phi: f64,
    },
    SearchZeros {
        a: Complex64,
        b: Complex64,
    },
    Copy {
        region: SiteRange,
        copy_region: SiteRange,
    },
    Cleanup {
        region: SiteRange,
        copy_region: SiteRange,
        pattern: BitString,
    },
    Shift {
        region: SiteRange,
        #[serde(default = "default_offset")]
        offset: usize,
    },
}

impl TaskParams {
    pub fn name(&self) -> &'static str {
        match self {
            TaskParams::Rotate { .. } => "rotate",
            TaskParams::SearchZeros { .. } => "search_zeros",
            TaskParams::Copy { .. } => "copy",
            TaskParams::Cleanup { .. } => "cleanup",
            TaskParams::Shift { .. } => "shift",
        }
    }

    pub fn build(&self, env: Environment) -> Result<TaskSpec> {
        match self {
            TaskParams::Rotate { phi } => make_rotate_task(*phi, env),
            TaskParams::SearchZeros { a, b } => make_search_zeros_task(*a, *b, env),
            TaskParams::Copy {
                region,
                copy_region,
            } => make_copy_task(*region, *copy_region, env),
            TaskParams::Cleanup {
                region,
                copy_region,
                pattern,
            } => make_cleanup_task(*region, *copy_region, *pattern, env),
            TaskParams::Shift { region, offset } => make_shift_task(*region, *offset, env),
        }
    }
}

/// A compiled task: rule sets, completion flags and a start configuration.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub params: TaskParams,
    pub geometry: LatticeGeometry,
    pub table: LookupTable,
    pub computation: RuleSet,
    pub action: RuleSet,
    /// Output values marking completion.
    pub final_outputs: Vec<usize>,
    /// Robot position of [`TaskSpec::initial`].
    pub start_position: usize,
    /// Start configuration over an all-zero environment.
    pub initial: Configuration,
    /// Length of a completed run in `T` steps, when it does not depend on
    /// the input.
    pub run_length: Option<usize>,
}

impl TaskSpec {
    fn assemble(
        params: TaskParams,
        env: Environment,
        table: LookupTable,
        action: RuleSet,
        final_outputs: Vec<usize>,
        start_position: usize,
        run_length: Option<usize>,
    ) -> Result<Self> {
        let geometry = LatticeGeometry::new(
            env.size,
            env.boundary,
            DEFAULT_ONBOARD,
            SWEEP_HEAD_STATES,
            table.registers(),
        )?;
        let computation = compile_lookup_computation(&table, &geometry)?;
        let initial = Configuration::start(
            &geometry,
            CODE_START,
            start_position,
            BitString::zeros(env.size),
        )?;
        let spec = Self {
            params,
            geometry,
            table,
            computation,
            action,
            final_outputs,
            start_position,
            initial,
            run_length,
        };
        spec.step_operator()?;
        Ok(spec)
    }

    pub fn name(&self) -> &'static str {
        self.params.name()
    }

    /// `T_QR` with action rules barred from reading memory.
    pub fn step_operator(&self) -> Result<StepOperator> {
        StepOperator::compile(
            self.computation.clone(),
            self.action.clone(),
            self.geometry,
            CompileOptions {
                strict_memory: true,
            },
        )
    }

    /// Start configuration over the environment `env`.
    pub fn input(&self, env: &str) -> Result<Configuration> {
        let s: BitString = env.parse()?;
        Configuration::start(&self.geometry, CODE_START, self.start_position, s)
    }

    pub fn is_final(&self, output: usize) -> bool {
        self.final_outputs.contains(&output)
    }
}

pub(crate) fn completion_outcome() -> RuleOutcome {
    RuleOutcome::stay().dj(1).flip()
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn completion_rules() -> Vec<LocalRule> {
    vec![LocalRule::action(
        RuleMatch::any().output(CODE_COMPLETE),
        completion_outcome(),
        one(),
    )]
}

/// Drops rules whose amplitude is numerically zero.
fn significant(rules: Vec<LocalRule>) -> Vec<LocalRule> {
    rules
        .into_iter()
        .filter(|r| r.amplitude.norm() > PRUNE)
        .collect()
}

/// Four-code table defined on the listed `(output, memory) -> next`
/// contexts; every other context maps to [`CODE_START`].
fn standard_table(valid: &[((usize, usize), usize)]) -> Result<LookupTable> {
    LookupTable::from_fn(STANDARD_CODES, |l2, l1, _| {
        valid
            .iter()
            .find(|(ctx, _)| *ctx == (l2, l1))
            .map_or(CODE_START, |(_, next)| *next)
    })
}

/// Rotation `R(φ) = [[cos φ/2, -sin φ/2], [sin φ/2, cos φ/2]]` of the qubit
/// under the robot, a single action step.
pub fn make_rotate_task(phi: f64, env: Environment) -> Result<TaskSpec> {
    if !phi.is_finite() {
        return Err(Error::Task(format!(
            "rotation angle must be finite, got {phi}"
        )));
    }
    let (sin, cos) = (phi / 2.0).sin_cos();
    let rotate = |from: u8, to: u8, amp: f64| {
        LocalRule::action(
            RuleMatch::any().output(CODE_ROTATE).s(from),
            RuleOutcome::stay().s(to).flip(),
            Complex64::new(amp, 0.0),
        )
    };
    let mut rules = significant(vec![
        rotate(0, 0, cos),
        rotate(0, 1, sin),
        rotate(1, 0, -sin),
        rotate(1, 1, cos),
    ]);
    rules.extend(completion_rules());
    let table = standard_table(&[
        ((CODE_START, CODE_START), CODE_ROTATE),
        ((CODE_ROTATE, CODE_START), CODE_COMPLETE),
        ((CODE_COMPLETE, CODE_ROTATE), CODE_COMPLETE),
        ((CODE_COMPLETE, CODE_COMPLETE), CODE_COMPLETE),
    ])?;
    let run = 2 * (DEFAULT_ONBOARD + 2) + 2;
    TaskSpec::assemble(
        TaskParams::Rotate { phi },
        env,
        table,
        RuleSet::new(Phase::Action, rules)?,
        vec![CODE_COMPLETE],
        0,
        Some(run),
    )
}

/// Walk right over zeros, rewriting each to `a|0⟩ + b|1⟩`, until a 1 is
/// read.
pub fn make_search_zeros_task(a: Complex64, b: Complex64, env: Environment) -> Result<TaskSpec> {
    let norm = a.norm_sqr() + b.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Task(format!("|a|^2 + |b|^2 = {norm}, expected 1")));
    }
    let mut rules = significant(vec![
        LocalRule::action(
            RuleMatch::any().output(CODE_SEARCH).s(0),
            RuleOutcome::stay().s(0).dj(1),
            a,
        ),
        LocalRule::action(
            RuleMatch::any().output(CODE_SEARCH).s(0),
            RuleOutcome::stay().s(1).dj(1),
            b,
        ),
    ]);
    rules.push(LocalRule::action(
        RuleMatch::any().output(CODE_SEARCH).s(1),
        RuleOutcome::stay().flip(),
        one(),
    ));
    rules.extend(completion_rules());
    let table = standard_table(&[
        ((CODE_START, CODE_START), CODE_SEARCH),
        ((CODE_SEARCH, CODE_START), CODE_COMPLETE),
        ((CODE_COMPLETE, CODE_SEARCH), CODE_COMPLETE),
        ((CODE_COMPLETE, CODE_COMPLETE), CODE_COMPLETE),
    ])?;
    TaskSpec::assemble(
        TaskParams::SearchZeros { a, b },
        env,
        table,
        RuleSet::new(Phase::Action, rules)?,
        vec![CODE_COMPLETE],
        0,
        None,
    )
}

fn check_range(name: &str, r: &SiteRange, env: &Environment) -> Result<()> {
    if r.len == 0 || r.start + r.len > env.size {
        return Err(Error::Task(format!(
            "{name} [{}, {}) must be non-empty and inside the {}-site lattice",
            r.start,
            r.start + r.len,
            env.size
        )));
    }
    Ok(())
}

fn check_disjoint(a: &SiteRange, b: &SiteRange) -> Result<()> {
    if a.start < b.start + b.len && b.start < a.start + a.len {
        return Err(Error::Task("regions overlap".into()));
    }
    Ok(())
}

/// `T` steps in a completed script run: a computation and an action per
/// controller step, then the completion action.
fn script_run_length(steps: usize) -> usize {
    (steps + 1) * (DEFAULT_ONBOARD + 3)
}

/// Single sweep from `region` towards `copy_region`: load each region bit
/// (optionally overwriting it with `pattern`), then XOR it into the copy
/// site and drop it again by reading the copy back.
fn copy_visits(
    region: &SiteRange,
    copy_region: &SiteRange,
    pattern: Option<&BitString>,
) -> Vec<script::Visit> {
    let rightward = copy_region.start > region.start;
    let order: Vec<usize> = if rightward {
        (0..region.len).collect()
    } else {
        (0..region.len).rev().collect()
    };
    let r: Vec<i64> = region.sites().collect();
    let c: Vec<i64> = copy_region.sites().collect();
    let mut visits = Vec::new();
    for &q in &order {
        let mut v = script::Visit::at(r[q]);
        v.load = Some(q);
        if let Some(y) = pattern {
            v.xor_slot = Some(q);
            v.xor_const = y.get(q);
        }
        visits.push(v);
    }
    for &q in &order {
        let mut write = script::Visit::at(c[q]);
        write.xor_slot = Some(q);
        visits.push(write);
        let mut drop = script::Visit::at(c[q]);
        drop.unload = Some(q);
        visits.push(drop);
    }
    visits
}

fn script_task(
    params: TaskParams,
    env: Environment,
    visits: Vec<script::Visit>,
    slots: usize,
) -> Result<TaskSpec> {
    let start = visits[0].pos.rem_euclid(env.size as i64) as usize;
    let controller = script::compile_script(&visits, slots)?;
    TaskSpec::assemble(
        params,
        env,
        controller.table,
        controller.action,
        vec![controller.done],
        start,
        Some(script_run_length(controller.steps)),
    )
}

/// `Σ c_x |x⟩|0⟩_cp → Σ c_x |x⟩|x⟩_cp`, bit by bit.
pub fn make_copy_task(
    region: SiteRange,
    copy_region: SiteRange,
    env: Environment,
) -> Result<TaskSpec> {
    check_range("region", &region, &env)?;
    check_range("copy region", &copy_region, &env)?;
    if region.len != copy_region.len {
        return Err(Error::Task(
            "region and copy region differ in length".into(),
        ));
    }
    check_disjoint(&region, &copy_region)?;
    let visits = copy_visits(&region, &copy_region, None);
    script_task(
        TaskParams::Copy {
            region,
            copy_region,
        },
        env,
        visits,
        region.len,
    )
}

/// `Σ c_x |x⟩|0⟩_cp → |y⟩ Σ c_x |x⟩_cp`: copy, then overwrite the region
/// with `pattern`.
pub fn make_cleanup_task(
    region: SiteRange,
    copy_region: SiteRange,
    pattern: BitString,
    env: Environment,
) -> Result<TaskSpec> {
    check_range("region", &region, &env)?;
    check_range("copy region", &copy_region, &env)?;
    if region.len != copy_region.len || pattern.len() != region.len {
        return Err(Error::Task(
            "region, copy region and pattern must have equal length".into(),
        ));
    }
    check_disjoint(&region, &copy_region)?;
    let visits = copy_visits(&region, &copy_region, Some(&pattern));
    script_task(
        TaskParams::Cleanup {
            region,
            copy_region,
            pattern,
        },
        env,
        visits,
        region.len,
    )
}

/// Moves the bit pattern of `region` right by `offset` sites if the
/// destination window is all zero; otherwise the environment is left alone.
///
/// The robot sweeps right loading the region and checking the destination,
/// back left writing the destination and clearing the region, and right
/// again to drop the carried bits.
pub fn make_shift_task(region: SiteRange, offset: usize, env: Environment) -> Result<TaskSpec> {
    check_range("region", &region, &env)?;
    if offset < region.len {
        return Err(Error::Task(format!(
            "offset {offset} makes the destination overlap the region"
        )));
    }
    let end = region.start + offset + region.len;
    let fits = match env.boundary {
        Boundary::Bounded => end <= env.size,
        Boundary::Cyclic => offset + region.len <= env.size,
    };
    if !fits {
        return Err(Error::Task(format!(
            "destination window does not fit on the {}-site lattice",
            env.size
        )));
    }
    let n = region.len;
    let r: Vec<i64> = region.sites().collect();
    let d: Vec<i64> = r.iter().map(|x| x + offset as i64).collect();
    let mut visits = Vec::new();
    for (q, &site) in r.iter().enumerate() {
        let mut v = script::Visit::at(site);
        v.load = Some(q);
        visits.push(v);
    }
    for (q, &site) in d.iter().enumerate() {
        let mut v = script::Visit::at(site);
        v.check_zero = true;
        if q == n - 1 {
            v.xor_slot = Some(q);
        }
        visits.push(v);
    }
    for q in (0..n - 1).rev() {
        let mut v = script::Visit::at(d[q]);
        v.xor_slot = Some(q);
        visits.push(v);
    }
    for q in (0..n).rev() {
        let mut v = script::Visit::at(r[q]);
        v.xor_slot = Some(q);
        visits.push(v);
    }
    for (q, &site) in d.iter().enumerate() {
        let mut v = script::Visit::at(site);
        v.unload = Some(q);
        visits.push(v);
    }
    script_task(TaskParams::Shift { region, offset }, env, visits, n)
}
