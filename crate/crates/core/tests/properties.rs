use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use qrobot::basis::{enumerate_reachable, BasisEnumeration};
use qrobot::dynamics::{build_hamiltonian, evolve, evolve_series, EvolutionMethod};
use qrobot::lattice::{BitString, Boundary, Configuration, LatticeGeometry};
use qrobot::operator::{to_matrix, SparseOperator};
use qrobot::rules::{
    CompileOptions, LocalRule, Phase, RuleFile, RuleMatch, RuleOutcome, RuleSet, StepOperator,
};
use qrobot::state::{MarginalSelector, QuantumState};
use qrobot::validate::{
    audit, check_env_locality, check_gating_and_diagonality, check_homogeneity,
    check_onboard_locality, translation_orbit, Condition, Translation, ViolationReport,
};
use qrobot::Error;

const MAX_DIM: usize = 1500;

fn geometry() -> impl Strategy<Value = LatticeGeometry> {
    (
        2usize..=4,
        1usize..=3,
        1usize..=3,
        1usize..=3,
        prop::bool::weighted(0.8),
    )
        .prop_map(|(m, n, p, l, cyclic)| {
            let boundary = if cyclic {
                Boundary::Cyclic
            } else {
                Boundary::Bounded
            };
            LatticeGeometry::new(m, boundary, n, p, l).unwrap()
        })
}

fn amplitude() -> impl Strategy<Value = Complex64> {
    (-2i32..=2, -2i32..=2)
        .prop_filter("nonzero", |(a, b)| *a != 0 || *b != 0)
        .prop_map(|(a, b)| Complex64::new(a as f64 * 0.5, b as f64 * 0.5))
}

fn bit() -> impl Strategy<Value = u8> {
    0u8..=1
}

fn computation_rule(g: LatticeGeometry) -> impl Strategy<Value = LocalRule> {
    let (p, l) = (g.head_states(), g.register_dim());
    (
        (
            prop::option::of(0..p),
            prop::option::of(bit()),
            prop::option::of(0..l),
            prop::option::of(0..l),
            prop::option::of(bit()),
        ),
        (
            prop::option::of(0..p),
            prop::option::of(bit()),
            -1i8..=1,
            prop::option::of(0..l),
            prop::option::of(0..l),
            any::<bool>(),
            any::<bool>(),
        ),
        amplitude(),
    )
        .prop_map(
            |((mp, mt, ml1, ml2, ms), (op, ot, dk, ol1, ol2, flip, keep_s), amp)| {
                let matches = RuleMatch {
                    p: mp,
                    t: mt,
                    l1: ml1,
                    l2: ml2,
                    s: ms,
                };
                let outcome = RuleOutcome {
                    p: op,
                    t: ot,
                    dk,
                    s: if keep_s { ms } else { None },
                    dj: 0,
                    l1: if flip { ol1 } else { None },
                    l2: if flip { ol2 } else { None },
                    flip,
                };
                LocalRule::computation(matches, outcome, amp)
            },
        )
}

fn action_rule(g: LatticeGeometry) -> impl Strategy<Value = LocalRule> {
    let l = g.register_dim();
    (
        prop::option::of(0..l),
        prop::option::of(0..l),
        prop::option::of(bit()),
        prop::option::of(bit()),
        -1i8..=1,
        any::<bool>(),
        amplitude(),
    )
        .prop_map(|(ml1, ml2, ms, os, dj, flip, amp)| {
            let matches = RuleMatch {
                l1: ml1,
                l2: ml2,
                s: ms,
                ..RuleMatch::default()
            };
            let outcome = RuleOutcome {
                s: os,
                dj,
                flip,
                ..RuleOutcome::default()
            };
            LocalRule::action(matches, outcome, amp)
        })
}

fn dedup(mut rules: Vec<LocalRule>) -> Vec<LocalRule> {
    let mut seen = Vec::new();
    rules.retain(|r| {
        let key = (r.matches, r.outcome);
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
    rules
}

fn configuration(g: LatticeGeometry) -> impl Strategy<Value = Configuration> {
    let (m, n) = (g.env_size(), g.onboard_size());
    (
        0..g.head_states(),
        0..n,
        prop::collection::vec(bit(), n),
        0..g.register_dim(),
        0..g.register_dim(),
        bit(),
        0..m,
        prop::collection::vec(bit(), m),
    )
        .prop_map(move |(p, k, t, l1, l2, c, j, s)| {
            Configuration::start(&g, l2, j, BitString::from_bits(&s))
                .unwrap()
                .with_head(p, k, BitString::from_bits(&t))
                .with_registers(l1, l2)
                .with_control(c)
        })
}

#[derive(Clone, Debug)]
struct Model {
    op: StepOperator,
    seed: Configuration,
}

fn model() -> impl Strategy<Value = Model> {
    geometry().prop_flat_map(|g| {
        (
            prop::collection::vec(computation_rule(g), 0..5),
            prop::collection::vec(action_rule(g), 0..4),
            configuration(g),
        )
            .prop_map(move |(comp, act, seed)| {
                let comp = RuleSet::new(Phase::Computation, dedup(comp)).unwrap();
                let act = RuleSet::new(Phase::Action, dedup(act)).unwrap();
                let op = StepOperator::compile(comp, act, g, CompileOptions::default()).unwrap();
                Model { op, seed }
            })
    })
}

/// Translation-closed closure of the seed, or `None` when it is too large.
fn closed_basis(m: &Model) -> Option<Arc<BasisEnumeration>> {
    let seeds = translation_orbit(m.op.geometry(), [&m.seed]);
    match enumerate_reachable(seeds, &m.op, MAX_DIM) {
        Ok(b) => Some(Arc::new(b)),
        Err(Error::Capacity { .. }) => None,
        Err(e) => panic!("{e}"),
    }
}

fn random_state(basis: &BasisEnumeration, weights: &[(f64, f64)]) -> QuantumState {
    let pairs = basis
        .configs()
        .iter()
        .zip(weights.iter().cycle())
        .map(|(c, (re, im))| (*c, Complex64::new(*re, *im)));
    QuantumState::from_pairs(*basis.geometry(), pairs).unwrap()
}

fn weights() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..12).prop_filter("not all zero", |w| {
        w.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3)
    })
}

/// Independent re-evaluation of a reported witness.
fn witness_holds(r: &ViolationReport, full: &SparseOperator, g: &LatticeGeometry) -> bool {
    let (to, from) = (&r.row, &r.column);
    let env_dist = g.env_distance(to.j(), from.j());
    let onboard_dist = g.onboard_distance(to.k(), from.k());
    match r.condition {
        Condition::EnvLocality => {
            env_dist > 1 || from.s().diff_sites(&to.s()).iter().any(|&q| q != from.j())
        }
        Condition::OnboardLocality => {
            onboard_dist > 1 || from.t().diff_sites(&to.t()).iter().any(|&q| q != from.k())
        }
        Condition::ComputationGating => from.control() != 0,
        Condition::ComputationDiagonality => to.s() != from.s() || to.j() != from.j(),
        Condition::ActionGating => from.control() != 1,
        Condition::ActionRegisterDiagonality => {
            to.memory() != from.memory() || to.output() != from.output()
        }
        Condition::ActionOnboardInvariance => {
            to.p() != from.p() || to.k() != from.k() || to.t() != from.t()
        }
        Condition::EnvHomogeneity | Condition::OnboardHomogeneity => {
            let shift = |c: &Configuration| match r.condition {
                Condition::EnvHomogeneity => c.translate_env(g, 1),
                _ => c.translate_onboard(g, 1),
            };
            let b = full.basis();
            let at = |row: &Configuration, col: &Configuration| {
                full.get(b.index_of(row).unwrap(), b.index_of(col).unwrap())
            };
            at(to, from) != at(&shift(to), &shift(from))
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn enumeration_is_closed_under_t_and_its_adjoint(m in model()) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, MAX_DIM) else {
            return Ok(());
        };
        prop_assert!(basis.contains(&m.seed));
        for cfg in basis.configs() {
            for (next, _) in m.op.image(cfg) {
                prop_assert!(basis.contains(&next), "{cfg} -> {next} escapes");
            }
            for (prev, _) in m.op.preimage(cfg) {
                prop_assert!(basis.contains(&prev), "{prev} -> {cfg} escapes");
            }
        }
    }

    #[test]
    fn rule_compiled_operators_pass_every_structural_check(m in model()) {
        let Some(basis) = closed_basis(&m) else { return Ok(()); };
        let reports = audit(&m.op, &basis).unwrap();
        prop_assert!(reports.is_empty(), "{:?}", reports.first());
    }

    #[test]
    fn apply_is_linear(m in model(), w1 in weights(), w2 in weights(), a in amplitude(), b in amplitude()) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, MAX_DIM) else { return Ok(()); };
        let psi = random_state(&basis, &w1);
        let chi = random_state(&basis, &w2);
        let combined = psi.scale(a).add_scaled(&chi, b).unwrap();
        let lhs = m.op.apply(&combined).unwrap();
        let rhs = m.op.apply(&psi).unwrap().scale(a)
            .add_scaled(&m.op.apply(&chi).unwrap(), b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-14, "{}", lhs.max_abs_diff(&rhs));
    }

    #[test]
    fn matrix_and_rule_application_agree(m in model(), w in weights()) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, MAX_DIM) else { return Ok(()); };
        let basis = Arc::new(basis);
        let t = to_matrix(&m.op, &basis).unwrap();
        let psi = random_state(&basis, &w);
        let by_rules = m.op.apply(&psi).unwrap();
        let by_matrix = t.apply(&psi).unwrap();
        prop_assert!(by_rules.max_abs_diff(&by_matrix) <= 1e-14);
    }

    #[test]
    fn hamiltonian_control_zero_block_holds_only_computation_terms(
        m in model(),
        k in 0.25f64..4.0,
    ) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, MAX_DIM) else { return Ok(()); };
        let basis = Arc::new(basis);
        let tc = to_matrix(&m.op.computation_part(), &basis).unwrap();
        let h = build_hamiltonian(&to_matrix(&m.op, &basis).unwrap(), k).unwrap();
        prop_assert_eq!(h.matrix().hermiticity_defect(), 0.0);
        let n = basis.len();
        for r in 0..n {
            for c in 0..n {
                if basis.configs()[r].control() != 0 || basis.configs()[c].control() != 0 {
                    continue;
                }
                let diag = if r == c { 2.0 * k } else { 0.0 };
                let want = Complex64::new(diag, 0.0) - (tc.get(r, c) + tc.get(c, r).conj()) * k;
                prop_assert!((h.matrix().get(r, c) - want).norm() <= 1e-15 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn validators_only_report_genuine_witnesses(
        (g, comp, act) in geometry().prop_flat_map(|g| (
            Just(g),
            prop::collection::vec((configuration(g), configuration(g), amplitude()), 0..6),
            prop::collection::vec((configuration(g), configuration(g), amplitude()), 0..6),
        ))
    ) {
        let mentioned: Vec<Configuration> =
            comp.iter().chain(&act).flat_map(|(r, c, _)| [*r, *c]).collect();
        let basis = Arc::new(BasisEnumeration::new(g, translation_orbit(&g, &mentioned)).unwrap());
        let comp = SparseOperator::from_elements(Arc::clone(&basis), comp).unwrap();
        let act = SparseOperator::from_elements(Arc::clone(&basis), act).unwrap();
        let full = SparseOperator::from_triplets(
            Arc::clone(&basis),
            comp.iter().chain(act.iter()).collect::<Vec<_>>(),
        ).unwrap();
        let mut reports = check_env_locality(&full);
        reports.extend(check_onboard_locality(&comp));
        reports.extend(check_gating_and_diagonality(&act, &comp));
        if g.env_boundary() == Boundary::Cyclic {
            reports.extend(check_homogeneity(&full, Translation::EnvJ).unwrap());
        }
        reports.extend(check_homogeneity(&full, Translation::OnboardK).unwrap());
        for r in &reports {
            prop_assert!(witness_holds(r, &full, &g), "spurious report {r:?}");
        }
        // Sorted output is deterministic.
        let again = check_env_locality(&full);
        prop_assert_eq!(again, check_env_locality(&full));
    }

    #[test]
    fn normalize_is_idempotent_and_marginals_sum_to_one(
        (g, pairs) in geometry().prop_flat_map(|g| (
            Just(g),
            prop::collection::vec((configuration(g), amplitude()), 1..10),
        ))
    ) {
        let state = QuantumState::from_pairs(g, pairs).unwrap();
        prop_assume!(!state.is_empty());
        let once = state.normalize().unwrap();
        prop_assert_eq!(once.normalize().unwrap(), once.clone());
        for sel in MarginalSelector::ALL {
            let total: f64 = once.marginal(sel).values().sum();
            prop_assert!((total - 1.0).abs() <= 1e-10, "{} sums to {total}", sel.name());
        }
    }

    #[test]
    fn configuration_order_is_total_and_text_round_trips(
        (g, mut configs, rotate) in geometry().prop_flat_map(|g| (
            Just(g),
            prop::collection::vec(configuration(g), 1..20),
            0usize..20,
        ))
    ) {
        for c in &configs {
            prop_assert_eq!(&Configuration::parse(&g, &c.to_string()).unwrap(), c);
            prop_assert_eq!(c.cmp(c), std::cmp::Ordering::Equal);
        }
        let mut a = configs.clone();
        a.sort();
        let shift = rotate % configs.len();
        configs.rotate_left(shift);
        configs.sort();
        prop_assert_eq!(a.clone(), configs);
        for w in a.windows(2) {
            prop_assert!(w[0] <= w[1]);
            prop_assert_eq!(w[0] == w[1], w[0].cmp(&w[1]) == std::cmp::Ordering::Equal);
        }
    }

    #[test]
    fn rule_files_round_trip_through_json(m in model()) {
        let file = RuleFile {
            computation: m.op.computation_rules().clone(),
            action: m.op.action_rules().clone(),
            options: m.op.options(),
        };
        let text = serde_json::to_string(&file).unwrap();
        let back: RuleFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back.computation, &file.computation);
        prop_assert_eq!(&back.action, &file.action);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn evolution_methods_agree_and_preserve_the_norm(
        m in model(),
        w in weights(),
        k in 0.25f64..2.0,
        frac in 0.0f64..1.0,
    ) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, 400) else { return Ok(()); };
        let basis = Arc::new(basis);
        let h = build_hamiltonian(&to_matrix(&m.op, &basis).unwrap(), k).unwrap();
        let psi = random_state(&basis, &w).normalize().unwrap();
        let t = frac * 10.0 / k;
        let reference = evolve(&h, &psi, t, EvolutionMethod::DenseEigen, 1e-12).unwrap();
        prop_assert!((reference.norm() - 1.0).abs() < 1e-9);
        for method in [EvolutionMethod::krylov(), EvolutionMethod::scaled_taylor()] {
            let out = evolve(&h, &psi, t, method, 1e-10).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-7, "{} norm {}", method.name(), out.norm());
            let d = out.max_abs_diff(&reference);
            prop_assert!(d < 1e-7, "{} differs by {d:e} at t={t}", method.name());
        }
    }

    #[test]
    fn series_matches_pointwise_evolution(
        m in model(),
        w in weights(),
        mut times in prop::collection::vec(0.0f64..5.0, 1..6),
    ) {
        let Ok(basis) = enumerate_reachable([m.seed], &m.op, 400) else { return Ok(()); };
        let basis = Arc::new(basis);
        let h = build_hamiltonian(&to_matrix(&m.op, &basis).unwrap(), 1.0).unwrap();
        let psi = random_state(&basis, &w).normalize().unwrap();
        times.sort_by(f64::total_cmp);
        for method in [EvolutionMethod::DenseEigen, EvolutionMethod::krylov()] {
            let series = evolve_series(&h, &psi, &times, method, 1e-10).unwrap();
            for (t, state) in times.iter().zip(&series.states) {
                let single = evolve(&h, &psi, *t, method, 1e-10).unwrap();
                prop_assert!(single.max_abs_diff(state) <= 1e-12);
            }
        }
    }
}
