//! Local transition rules for the computation and action phases and their
//! compilation into a step operator `T = T_a + T_c`.
//!
//! Rules are written relative to the heads: a rule reads the on-board qubit
//! under `h2`, the environment qubit under the robot, the internal head state
//! and the registers, and describes a single step. Absolute positions never
//! appear, so every compiled operator is translation invariant on a ring.
//!
//! Computation rules fire only with the control qubit at 0 and never touch
//! the environment or the robot position. Action rules fire only with the
//! control qubit at 1 and never touch the on-board machine or the registers.
//! The control flip (0 to 1 for computation, 1 to 0 for action) is part of
//! the rule outcome.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Configuration, LatticeGeometry};
use crate::state::{Accumulator, QuantumState, PRUNE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Computation,
    Action,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Computation => "computation",
            Phase::Action => "action",
        }
    }

    /// Control value on which rules of this phase fire.
    pub fn active_control(&self) -> u8 {
        match self {
            Phase::Computation => 0,
            Phase::Action => 1,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Context a rule reads. `None` is a wildcard.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleMatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u8>,
}

impl RuleMatch {
    pub fn any() -> Self {
        Self::default()
    }
    pub fn p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }
    pub fn t(mut self, t: u8) -> Self {
        self.t = Some(t);
        self
    }
    pub fn memory(mut self, l1: usize) -> Self {
        self.l1 = Some(l1);
        self
    }
    pub fn output(mut self, l2: usize) -> Self {
        self.l2 = Some(l2);
        self
    }
    pub fn s(mut self, s: u8) -> Self {
        self.s = Some(s);
        self
    }

    fn accepts(&self, cfg: &Configuration) -> bool {
        fn ok<T: PartialEq>(want: Option<T>, have: T) -> bool {
            want.is_none_or(|w| w == have)
        }
        ok(self.p, cfg.p)
            && ok(self.t, cfg.local_onboard())
            && ok(self.l1, cfg.l1)
            && ok(self.l2, cfg.l2)
            && ok(self.s, cfg.local_env())
    }
}

/// What a rule writes. Unset fields keep their value; `t` and `s` are
/// written at the head position before the head moves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleOutcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u8>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dk: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u8>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dj: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flip: bool,
}

fn is_zero(d: &i8) -> bool {
    *d == 0
}

impl RuleOutcome {
    pub fn stay() -> Self {
        Self::default()
    }
    pub fn p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }
    pub fn t(mut self, t: u8) -> Self {
        self.t = Some(t);
        self
    }
    pub fn dk(mut self, dk: i8) -> Self {
        self.dk = dk;
        self
    }
    pub fn s(mut self, s: u8) -> Self {
        self.s = Some(s);
        self
    }
    pub fn dj(mut self, dj: i8) -> Self {
        self.dj = dj;
        self
    }
    pub fn registers(mut self, memory: usize, output: usize) -> Self {
        self.l1 = Some(memory);
        self.l2 = Some(output);
        self
    }
    pub fn flip(mut self) -> Self {
        self.flip = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalRule {
    pub phase: Phase,
    #[serde(rename = "match", default)]
    pub matches: RuleMatch,
    #[serde(default)]
    pub outcome: RuleOutcome,
    /// Serialized as `[re, im]`.
    pub amplitude: Complex64,
}

impl LocalRule {
    pub fn computation(matches: RuleMatch, outcome: RuleOutcome, amplitude: Complex64) -> Self {
        Self {
            phase: Phase::Computation,
            matches,
            outcome,
            amplitude,
        }
    }

    pub fn action(matches: RuleMatch, outcome: RuleOutcome, amplitude: Complex64) -> Self {
        Self {
            phase: Phase::Action,
            matches,
            outcome,
            amplitude,
        }
    }

    /// Image of `cfg` under this rule alone, `None` if the rule does not fire
    /// or the robot would leave a bounded lattice.
    pub fn fire(&self, g: &LatticeGeometry, cfg: &Configuration) -> Option<Configuration> {
        if cfg.c != self.phase.active_control() || !self.matches.accepts(cfg) {
            return None;
        }
        let o = &self.outcome;
        let mut next = *cfg;
        match self.phase {
            Phase::Computation => {
                if let Some(p) = o.p {
                    next.p = p;
                }
                if let Some(t) = o.t {
                    next.t = next.t.with(cfg.k, t);
                }
                next.k = g.shift_onboard(cfg.k, o.dk);
                if let Some(l1) = o.l1 {
                    next.l1 = l1;
                }
                if let Some(l2) = o.l2 {
                    next.l2 = l2;
                }
                if o.flip {
                    next.c = 1;
                }
            }
            Phase::Action => {
                if let Some(s) = o.s {
                    next.s = next.s.with(cfg.j, s);
                }
                next.j = g.shift_env(cfg.j, o.dj)?;
                if o.flip {
                    next.c = 0;
                }
            }
        }
        Some(next)
    }

    /// Configurations this rule could have come from when it produced
    /// `target`. A superset: callers confirm each candidate with [`fire`].
    ///
    /// [`fire`]: LocalRule::fire
    fn source_candidates(&self, g: &LatticeGeometry, target: &Configuration) -> Vec<Configuration> {
        let o = &self.outcome;
        let produced_control = match (self.phase, o.flip) {
            (Phase::Computation, false) | (Phase::Action, true) => 0,
            (Phase::Computation, true) | (Phase::Action, false) => 1,
        };
        if target.c != produced_control {
            return Vec::new();
        }
        let mut base = *target;
        base.c = self.phase.active_control();

        // Each entry lists the admissible old values of one written field.
        let options =
            |written: Option<usize>, current: usize, matched: Option<usize>, range: usize| {
                match written {
                    None => vec![current],
                    Some(w) if w != current => vec![],
                    Some(_) => matched.map_or_else(|| (0..range).collect(), |m| vec![m]),
                }
            };

        match self.phase {
            Phase::Computation => {
                base.k = g.shift_onboard(target.k, -o.dk);
                let written_t = o.t.map(usize::from);
                let ts = options(
                    written_t,
                    target.t.get(base.k) as usize,
                    self.matches.t.map(usize::from),
                    2,
                );
                let ps = options(o.p, target.p, self.matches.p, g.head_states());
                let l1s = options(o.l1, target.l1, self.matches.l1, g.register_dim());
                let l2s = options(o.l2, target.l2, self.matches.l2, g.register_dim());
                let mut out = Vec::new();
                for &p in &ps {
                    for &tk in &ts {
                        for &l1 in &l1s {
                            for &l2 in &l2s {
                                let mut cand = base;
                                cand.p = p;
                                cand.t = cand.t.with(base.k, tk as u8);
                                cand.l1 = l1;
                                cand.l2 = l2;
                                out.push(cand);
                            }
                        }
                    }
                }
                out
            }
            Phase::Action => {
                let Some(j) = g.shift_env(target.j, -o.dj) else {
                    return Vec::new();
                };
                base.j = j;
                let written_s = o.s.map(usize::from);
                let ss = options(
                    written_s,
                    target.s.get(j) as usize,
                    self.matches.s.map(usize::from),
                    2,
                );
                ss.into_iter()
                    .map(|sj| {
                        let mut cand = base;
                        cand.s = cand.s.with(j, sj as u8);
                        cand
                    })
                    .collect()
            }
        }
    }

    fn key(&self) -> (Phase, RuleMatch, RuleOutcome) {
        (self.phase, self.matches, self.outcome)
    }

    /// Structural conditions that do not depend on a geometry.
    fn check_shape(&self, strict_memory: bool) -> std::result::Result<(), String> {
        let m = &self.matches;
        let o = &self.outcome;
        for (name, d) in [("dk", o.dk), ("dj", o.dj)] {
            if !(-1..=1).contains(&d) {
                return Err(format!("{name}={d}: heads move at most one site per step"));
            }
        }
        for (name, bit) in [
            ("match.t", m.t),
            ("match.s", m.s),
            ("outcome.t", o.t),
            ("outcome.s", o.s),
        ] {
            if bit.is_some_and(|b| b > 1) {
                return Err(format!("{name} must be a qubit value 0 or 1"));
            }
        }
        match self.phase {
            Phase::Computation => {
                if o.dj != 0 {
                    return Err("computation rules cannot move the robot (dj must be 0)".into());
                }
                if let Some(s) = o.s {
                    if m.s != Some(s) {
                        return Err(
                            "environment diagonality: the environment qubit at the robot is not \
                             changed during computation"
                                .into(),
                        );
                    }
                }
                if (o.l1.is_some() || o.l2.is_some()) && !o.flip {
                    return Err(
                        "memory and output registers change only on the control flip".into(),
                    );
                }
            }
            Phase::Action => {
                if m.p.is_some() || m.t.is_some() {
                    return Err(
                        "action rules do not depend on the on-board machine (match.p / match.t)"
                            .into(),
                    );
                }
                if o.p.is_some() || o.t.is_some() || o.dk != 0 {
                    return Err("action rules cannot change the on-board machine".into());
                }
                if o.l1.is_some() || o.l2.is_some() {
                    return Err(
                        "no-cloning: action rules are diagonal in the memory and output registers"
                            .into(),
                    );
                }
                if strict_memory && m.l1.is_some() {
                    return Err("strict memory mode: action rules may not read memory".into());
                }
            }
        }
        Ok(())
    }

    fn check_ranges(&self, g: &LatticeGeometry) -> std::result::Result<(), String> {
        let regs = [
            ("match.l1", self.matches.l1),
            ("match.l2", self.matches.l2),
            ("outcome.l1", self.outcome.l1),
            ("outcome.l2", self.outcome.l2),
        ];
        for (name, v) in regs {
            if let Some(v) = v.filter(|&v| v >= g.register_dim()) {
                return Err(format!("{name}={v} out of range [0, {})", g.register_dim()));
            }
        }
        for (name, v) in [("match.p", self.matches.p), ("outcome.p", self.outcome.p)] {
            if let Some(v) = v.filter(|&v| v >= g.head_states()) {
                return Err(format!("{name}={v} out of range [0, {})", g.head_states()));
            }
        }
        if !self.amplitude.re.is_finite() || !self.amplitude.im.is_finite() {
            return Err("amplitude must be finite".into());
        }
        Ok(())
    }
}

/// Rules of a single phase. Construction rejects mixed phases and duplicate
/// (context, outcome) pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleSet {
    phase: Phase,
    rules: Vec<LocalRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRuleSet {
    phase: Phase,
    #[serde(default)]
    rules: Vec<LocalRule>,
}

impl<'de> Deserialize<'de> for RuleSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = RawRuleSet::deserialize(deserializer)?;
        RuleSet::new(raw.phase, raw.rules).map_err(serde::de::Error::custom)
    }
}

impl RuleSet {
    pub fn new(phase: Phase, rules: Vec<LocalRule>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (index, rule) in rules.iter().enumerate() {
            if rule.phase != phase {
                return Err(Error::Compile {
                    index,
                    phase: rule.phase.name(),
                    reason: format!("rule is tagged {} inside a {} rule set", rule.phase, phase),
                });
            }
            if !seen.insert(rule.key()) {
                return Err(Error::Compile {
                    index,
                    phase: phase.name(),
                    reason: "duplicate rule: identical context and outcome".into(),
                });
            }
        }
        Ok(Self { phase, rules })
    }

    pub fn empty(phase: Phase) -> Self {
        Self {
            phase,
            rules: Vec::new(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn rules(&self) -> &[LocalRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Forbid action rules from reading the memory register.
    #[serde(default)]
    pub strict_memory: bool,
}

/// Compiled `T_QR = T_a + T_c` over a geometry.
#[derive(Clone, Debug)]
pub struct StepOperator {
    geometry: LatticeGeometry,
    computation: RuleSet,
    action: RuleSet,
    options: CompileOptions,
    // Rule indices bucketed by the register the phase dispatches on
    // (head state for computation, output for action); `None` = wildcard.
    comp_index: HashMap<Option<usize>, Vec<usize>>,
    action_index: HashMap<Option<usize>, Vec<usize>>,
}

pub fn compile_ruleset(
    computation: RuleSet,
    action: RuleSet,
    geometry: LatticeGeometry,
) -> Result<StepOperator> {
    StepOperator::compile(computation, action, geometry, CompileOptions::default())
}

impl StepOperator {
    pub fn compile(
        computation: RuleSet,
        action: RuleSet,
        geometry: LatticeGeometry,
        options: CompileOptions,
    ) -> Result<Self> {
        for (set, phase) in [(&computation, Phase::Computation), (&action, Phase::Action)] {
            if set.phase != phase {
                return Err(Error::Compile {
                    index: 0,
                    phase: set.phase.name(),
                    reason: format!("expected a {phase} rule set"),
                });
            }
            for (index, rule) in set.rules.iter().enumerate() {
                rule.check_shape(options.strict_memory)
                    .and_then(|()| rule.check_ranges(&geometry))
                    .map_err(|reason| Error::Compile {
                        index,
                        phase: phase.name(),
                        reason,
                    })?;
            }
        }
        let bucket = |set: &RuleSet, key: fn(&LocalRule) -> Option<usize>| {
            let mut index: HashMap<Option<usize>, Vec<usize>> = HashMap::new();
            for (i, rule) in set.rules.iter().enumerate() {
                if rule.amplitude.norm() > PRUNE {
                    index.entry(key(rule)).or_default().push(i);
                }
            }
            index
        };
        let comp_index = bucket(&computation, |r| r.matches.p);
        let action_index = bucket(&action, |r| r.matches.l2);
        Ok(Self {
            geometry,
            computation,
            action,
            options,
            comp_index,
            action_index,
        })
    }

    pub fn zero(geometry: LatticeGeometry) -> Self {
        Self::compile(
            RuleSet::empty(Phase::Computation),
            RuleSet::empty(Phase::Action),
            geometry,
            CompileOptions::default(),
        )
        .expect("empty rule sets compile")
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn computation_rules(&self) -> &RuleSet {
        &self.computation
    }

    pub fn action_rules(&self) -> &RuleSet {
        &self.action
    }

    pub fn options(&self) -> CompileOptions {
        self.options
    }

    /// Same rules over another geometry (rules are position independent).
    pub fn with_geometry(&self, geometry: LatticeGeometry) -> Result<Self> {
        Self::compile(
            self.computation.clone(),
            self.action.clone(),
            geometry,
            self.options,
        )
    }

    /// `T_c` alone.
    pub fn computation_part(&self) -> Self {
        Self::compile(
            self.computation.clone(),
            RuleSet::empty(Phase::Action),
            self.geometry,
            self.options,
        )
        .expect("already validated")
    }

    /// `T_a` alone.
    pub fn action_part(&self) -> Self {
        Self::compile(
            RuleSet::empty(Phase::Computation),
            self.action.clone(),
            self.geometry,
            self.options,
        )
        .expect("already validated")
    }

    fn candidate_rules(&self, cfg: &Configuration) -> impl Iterator<Item = &LocalRule> {
        let (set, index, key) = if cfg.c == 0 {
            (&self.computation, &self.comp_index, cfg.p)
        } else {
            (&self.action, &self.action_index, cfg.l2)
        };
        let exact = index.get(&Some(key)).into_iter().flatten();
        let wild = index.get(&None).into_iter().flatten();
        exact.chain(wild).map(move |&i| &set.rules[i])
    }

    /// Index of the rules firing on `cfg` (for trace diagnostics).
    pub fn firing_rules(&self, cfg: &Configuration) -> Vec<&LocalRule> {
        self.candidate_rules(cfg)
            .filter(|r| r.fire(&self.geometry, cfg).is_some())
            .collect()
    }

    /// Column of `T`: every `c'` with `⟨c'|T|cfg⟩ ≠ 0`, in basis order.
    pub fn image(&self, cfg: &Configuration) -> Vec<(Configuration, Complex64)> {
        let mut acc: BTreeMap<Configuration, Complex64> = BTreeMap::new();
        for rule in self.candidate_rules(cfg) {
            if let Some(next) = rule.fire(&self.geometry, cfg) {
                *acc.entry(next).or_default() += rule.amplitude;
            }
        }
        acc.into_iter().filter(|(_, a)| a.norm() > PRUNE).collect()
    }

    /// Row of `T`: every `c` with `⟨target|T|c⟩ ≠ 0`, in basis order.
    pub fn preimage(&self, target: &Configuration) -> Vec<(Configuration, Complex64)> {
        let mut candidates = BTreeSet::new();
        let sets = [&self.computation, &self.action];
        for rule in sets.into_iter().flat_map(|s| s.rules.iter()) {
            if rule.amplitude.norm() <= PRUNE {
                continue;
            }
            for cand in rule.source_candidates(&self.geometry, target) {
                if rule.fire(&self.geometry, &cand) == Some(*target) {
                    candidates.insert(cand);
                }
            }
        }
        candidates
            .into_iter()
            .filter_map(|c| {
                let amp = self
                    .image(&c)
                    .into_iter()
                    .find(|(next, _)| next == target)
                    .map(|(_, a)| a)?;
                Some((c, amp))
            })
            .collect()
    }

    /// `T|ψ⟩`, unnormalized.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.geometry() != &self.geometry {
            return Err(Error::GeometryMismatch);
        }
        let mut acc = Accumulator::default();
        for (cfg, amp) in state.iter() {
            for (next, t) in self.image(cfg) {
                acc.add(next, t * amp);
            }
        }
        Ok(acc.finish(self.geometry))
    }

    /// `T†|ψ⟩`, unnormalized.
    pub fn apply_adjoint(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.geometry() != &self.geometry {
            return Err(Error::GeometryMismatch);
        }
        let mut acc = Accumulator::default();
        for (cfg, amp) in state.iter() {
            for (prev, t) in self.preimage(cfg) {
                acc.add(prev, t.conj() * amp);
            }
        }
        Ok(acc.finish(self.geometry))
    }
}

/// On-disk form of a complete rule program.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleFile {
    pub computation: RuleSet,
    pub action: RuleSet,
    #[serde(default)]
    pub options: CompileOptions,
}
