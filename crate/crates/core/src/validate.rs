//! Matrix-level certification of the structural conditions a robot step
//! operator must satisfy.
//!
//! Every check scans all stored elements of a [`SparseOperator`], so it
//! applies equally to rule-compiled operators and to hand-built ones. Checks
//! return violation lists rather than errors; an empty list is a pass.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration, LatticeGeometry};
use crate::operator::SparseOperator;
use crate::rules::StepOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Environment changes only under the robot; robot hops at most one site.
    EnvLocality,
    /// On-board qubit changes only under `h2`; `h2` hops at most one site.
    OnboardLocality,
    EnvHomogeneity,
    OnboardHomogeneity,
    /// `T_c` acts only on control 0.
    ComputationGating,
    /// `T_c` leaves environment and robot position alone.
    ComputationDiagonality,
    /// `T_a` acts only on control 1.
    ActionGating,
    /// `T_a` is diagonal in memory and output (no-cloning restriction).
    ActionRegisterDiagonality,
    /// `T_a` leaves the on-board machine alone.
    ActionOnboardInvariance,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_value(self).expect("unit variant");
        f.write_str(text.as_str().unwrap_or("?"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub condition: Condition,
    pub row: Configuration,
    pub column: Configuration,
    /// Serialized as `[re, im]`.
    pub value: Complex64,
    pub explanation: String,
}

impl ViolationReport {
    fn new(
        condition: Condition,
        op: &SparseOperator,
        r: usize,
        c: usize,
        value: Complex64,
        explanation: String,
    ) -> Self {
        Self {
            condition,
            row: *op.config(r),
            column: *op.config(c),
            value,
            explanation,
        }
    }
}

fn sorted(mut reports: Vec<ViolationReport>) -> Vec<ViolationReport> {
    reports.sort_by(|a, b| {
        (a.condition, a.row, a.column, a.explanation.as_str()).cmp(&(
            b.condition,
            b.row,
            b.column,
            b.explanation.as_str(),
        ))
    });
    reports
}

/// Environment locality: `s'` may differ from `s` only at the robot site
/// `j` of the column, and `|j' - j| ≤ 1` (ring distance on a ring).
pub fn check_env_locality(op: &SparseOperator) -> Vec<ViolationReport> {
    let g = *op.basis().geometry();
    let mut out = Vec::new();
    for (r, c, v) in op.iter() {
        let (to, from) = (op.config(r), op.config(c));
        let stray: Vec<usize> = to
            .s()
            .diff_sites(&from.s())
            .into_iter()
            .filter(|&q| q != from.j())
            .collect();
        if !stray.is_empty() {
            out.push(ViolationReport::new(
                Condition::EnvLocality,
                op,
                r,
                c,
                v,
                format!(
                    "environment qubits at sites {stray:?} change while the robot is at {}",
                    from.j()
                ),
            ));
        }
        let hop = g.env_distance(to.j(), from.j());
        if hop > 1 {
            out.push(ViolationReport::new(
                Condition::EnvLocality,
                op,
                r,
                c,
                v,
                format!("robot hops {hop} sites ({} -> {})", from.j(), to.j()),
            ));
        }
    }
    sorted(out)
}

/// On-board locality: `t'` may differ from `t` only at `k`, and
/// `|k' - k| ≤ 1` on the on-board ring.
pub fn check_onboard_locality(op: &SparseOperator) -> Vec<ViolationReport> {
    let g = *op.basis().geometry();
    let mut out = Vec::new();
    for (r, c, v) in op.iter() {
        let (to, from) = (op.config(r), op.config(c));
        let stray: Vec<usize> = to
            .t()
            .diff_sites(&from.t())
            .into_iter()
            .filter(|&q| q != from.k())
            .collect();
        if !stray.is_empty() {
            out.push(ViolationReport::new(
                Condition::OnboardLocality,
                op,
                r,
                c,
                v,
                format!(
                    "on-board qubits at sites {stray:?} change while h2 is at {}",
                    from.k()
                ),
            ));
        }
        let hop = g.onboard_distance(to.k(), from.k());
        if hop > 1 {
            out.push(ViolationReport::new(
                Condition::OnboardLocality,
                op,
                r,
                c,
                v,
                format!("h2 hops {hop} sites ({} -> {})", from.k(), to.k()),
            ));
        }
    }
    sorted(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Translation {
    EnvJ,
    OnboardK,
}

impl Translation {
    fn apply(&self, g: &LatticeGeometry, cfg: &Configuration, by: usize) -> Configuration {
        match self {
            Translation::EnvJ => cfg.translate_env(g, by),
            Translation::OnboardK => cfg.translate_onboard(g, by),
        }
    }

    fn period(&self, g: &LatticeGeometry) -> usize {
        match self {
            Translation::EnvJ => g.env_size(),
            Translation::OnboardK => g.onboard_size(),
        }
    }
}

/// Homogeneity: conjugating the matrix by the unit lattice translation
/// leaves every element unchanged, exactly.
///
/// The basis must be closed under the translation (see
/// [`translation_orbit`]); bounded environments are refused.
pub fn check_homogeneity(op: &SparseOperator, which: Translation) -> Result<Vec<ViolationReport>> {
    let basis = op.basis();
    let g = *basis.geometry();
    if which == Translation::EnvJ && g.env_boundary() == Boundary::Bounded {
        return Err(Error::BoundedHomogeneity);
    }
    let n = which.period(&g);
    let condition = match which {
        Translation::EnvJ => Condition::EnvHomogeneity,
        Translation::OnboardK => Condition::OnboardHomogeneity,
    };
    let shift = |cfg: &Configuration, by: usize| -> Result<usize> {
        let moved = which.apply(&g, cfg, by);
        basis.index_of(&moved).ok_or_else(|| {
            Error::NotInBasis(format!(
                "{moved} (translate of {cfg}; basis not translation closed)"
            ))
        })
    };
    // Each mismatch T[x] != T[τx] is reported once, at the untranslated x.
    let mut bases = std::collections::BTreeSet::new();
    for (r, c, _) in op.iter() {
        bases.insert((r, c));
        bases.insert((shift(op.config(r), n - 1)?, shift(op.config(c), n - 1)?));
    }
    let mut out = Vec::new();
    for (r, c) in bases {
        let (tr, tc) = (shift(op.config(r), 1)?, shift(op.config(c), 1)?);
        let (v, moved) = (op.get(r, c), op.get(tr, tc));
        if moved != v {
            out.push(ViolationReport::new(
                condition,
                op,
                r,
                c,
                v,
                format!(
                    "translated element <{}|T|{}> = {moved} differs",
                    op.config(tr),
                    op.config(tc)
                ),
            ));
        }
    }
    Ok(sorted(out))
}

/// Phase gating and diagonality for the two halves of the step operator.
pub fn check_gating_and_diagonality(
    action: &SparseOperator,
    computation: &SparseOperator,
) -> Vec<ViolationReport> {
    let mut out = Vec::new();
    for (r, c, v) in computation.iter() {
        let (to, from) = (computation.config(r), computation.config(c));
        if from.control() != 0 {
            out.push(ViolationReport::new(
                Condition::ComputationGating,
                computation,
                r,
                c,
                v,
                "computation step acts on a column with control 1".into(),
            ));
        }
        if to.s() != from.s() || to.j() != from.j() {
            out.push(ViolationReport::new(
                Condition::ComputationDiagonality,
                computation,
                r,
                c,
                v,
                "computation step changes the environment or the robot position".into(),
            ));
        }
    }
    for (r, c, v) in action.iter() {
        let (to, from) = (action.config(r), action.config(c));
        if from.control() != 1 {
            out.push(ViolationReport::new(
                Condition::ActionGating,
                action,
                r,
                c,
                v,
                "action step acts on a column with control 0".into(),
            ));
        }
        if to.memory() != from.memory() || to.output() != from.output() {
            out.push(ViolationReport::new(
                Condition::ActionRegisterDiagonality,
                action,
                r,
                c,
                v,
                "action step changes memory/output; registers must stay diagonal in the \
                 reference basis (no-cloning)"
                    .into(),
            ));
        }
        if to.p() != from.p() || to.k() != from.k() || to.t() != from.t() {
            out.push(ViolationReport::new(
                Condition::ActionOnboardInvariance,
                action,
                r,
                c,
                v,
                "action step changes the on-board machine".into(),
            ));
        }
    }
    sorted(out)
}

/// `max |U†U - I|` over all elements. Zero columns contribute 1.
pub fn check_unitarity(u: &SparseOperator) -> f64 {
    let n = u.dim();
    let mut gram: HashMap<(usize, usize), Complex64> = HashMap::new();
    for r in 0..n {
        let row = u.row(r);
        for &(a, ua) in row {
            for &(b, ub) in row {
                *gram.entry((a, b)).or_default() += ua.conj() * ub;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let diag = gram.get(&(a, a)).copied().unwrap_or_default();
        worst = worst.max((diag - Complex64::new(1.0, 0.0)).norm());
    }
    for (&(a, b), &g) in &gram {
        if a != b {
            worst = worst.max(g.norm());
        }
    }
    worst
}

/// Dense variant that also accepts rectangular input. A rectangular matrix
/// is zero-padded to square, so it can never pass.
pub fn check_unitarity_dense(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows().max(u.ncols());
    let mut padded = DMatrix::<Complex64>::zeros(n, n);
    padded.view_mut((0, 0), (u.nrows(), u.ncols())).copy_from(u);
    let gram = padded.adjoint() * &padded;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[(a, b)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DistinctPath {
    pub is_distinct_path: bool,
    /// Number of steps that produced a single basis state.
    pub length: usize,
    /// The orbit returned to the start configuration.
    pub closed: bool,
}

/// Amplitude below which a component counts as numerical noise.
pub const PATH_TOL: f64 = 1e-12;

/// Follows `T^n|start⟩` while each iterate is a single basis state and no
/// configuration repeats (returning to `start` closes the path).
pub fn check_distinct_path(
    op: &SparseOperator,
    start: &Configuration,
    n_steps: usize,
) -> Result<DistinctPath> {
    let basis = op.basis();
    let first = basis
        .index_of(start)
        .ok_or_else(|| Error::NotInBasis(start.to_string()))?;
    let mut visited = vec![false; basis.len()];
    visited[first] = true;
    let mut v = vec![Complex64::default(); basis.len()];
    v[first] = Complex64::new(1.0, 0.0);
    let mut length = 0;
    for _ in 0..n_steps {
        let next = op.matvec(&v);
        let support: Vec<usize> = (0..next.len())
            .filter(|&i| next[i].norm() > PATH_TOL)
            .collect();
        match support.as_slice() {
            [] => {
                return Ok(DistinctPath {
                    is_distinct_path: true,
                    length,
                    closed: false,
                })
            }
            [i] => {
                length += 1;
                if *i == first {
                    return Ok(DistinctPath {
                        is_distinct_path: true,
                        length,
                        closed: true,
                    });
                }
                if visited[*i] {
                    return Ok(DistinctPath {
                        is_distinct_path: false,
                        length,
                        closed: false,
                    });
                }
                visited[*i] = true;
            }
            _ => {
                return Ok(DistinctPath {
                    is_distinct_path: false,
                    length,
                    closed: false,
                })
            }
        }
        v = next;
    }
    Ok(DistinctPath {
        is_distinct_path: true,
        length,
        closed: false,
    })
}

/// Every environment and on-board translate of `configs`. Seeding a
/// closure with this orbit yields a translation-closed basis for any
/// homogeneous operator.
pub fn translation_orbit<'a, I>(g: &LatticeGeometry, configs: I) -> Vec<Configuration>
where
    I: IntoIterator<Item = &'a Configuration>,
{
    let env_shifts = match g.env_boundary() {
        Boundary::Cyclic => g.env_size(),
        Boundary::Bounded => 1,
    };
    let mut out = Vec::new();
    for cfg in configs {
        for a in 0..env_shifts {
            for b in 0..g.onboard_size() {
                out.push(cfg.translate_env(g, a).translate_onboard(g, b));
            }
        }
    }
    out
}

/// Full structural audit of a compiled step operator on `basis`:
/// environment locality of `T`, on-board locality of `T_c`, gating and
/// diagonality, and homogeneity where the lattice permits it.
pub fn audit(
    op: &StepOperator,
    basis: &std::sync::Arc<crate::basis::BasisEnumeration>,
) -> Result<Vec<ViolationReport>> {
    let full = crate::operator::to_matrix(op, basis)?;
    let comp = crate::operator::to_matrix(&op.computation_part(), basis)?;
    let act = crate::operator::to_matrix(&op.action_part(), basis)?;
    let mut out = check_env_locality(&full);
    out.extend(check_onboard_locality(&comp));
    out.extend(check_gating_and_diagonality(&act, &comp));
    if basis.geometry().env_boundary() == Boundary::Cyclic {
        out.extend(check_homogeneity(&full, Translation::EnvJ)?);
    }
    out.extend(check_homogeneity(&full, Translation::OnboardK)?);
    Ok(sorted(out))
}

pub fn write_jsonl<W: Write>(mut w: W, reports: &[ViolationReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
