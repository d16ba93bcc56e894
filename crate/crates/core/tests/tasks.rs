use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use qrobot::basis::enumerate_reachable;
use qrobot::dynamics::iterate_step;
use qrobot::lattice::{BitString, Configuration};
use qrobot::operator::to_matrix;
use qrobot::state::QuantumState;
use qrobot::tasks::*;
use qrobot::validate::check_unitarity_dense;
use qrobot::Error;

const MAX_STEPS: usize = 2000;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn env(cfg: &Configuration) -> String {
    cfg.s().to_string()
}

fn trace(task: &TaskSpec, input: &str) -> ClassicalTrace {
    classical_trace(task, &task.input(input).unwrap(), MAX_STEPS).unwrap()
}

/// Runs a fixed-length task on a superposition of environment inputs.
fn run_superposition(task: &TaskSpec, inputs: &[(&str, Complex64)]) -> QuantumState {
    let pairs = inputs.iter().map(|(s, a)| (task.input(s).unwrap(), *a));
    let state = QuantumState::from_pairs(task.geometry, pairs).unwrap();
    let op = task.step_operator().unwrap();
    let n = task.run_length.expect("fixed run length");
    iterate_step(&op, &state, n).unwrap().pop().unwrap()
}

/// Environment amplitudes of a state whose robot part is a single
/// configuration shared by all components.
fn env_amplitudes(state: &QuantumState) -> Vec<(String, Complex64)> {
    let robots: std::collections::BTreeSet<String> = state
        .support()
        .map(|cfg| cfg.with_env(BitString::zeros(cfg.s().len())).to_string())
        .collect();
    assert_eq!(robots.len(), 1, "robot state depends on the environment");
    state.iter().map(|(cfg, a)| (env(cfg), *a)).collect()
}

#[test]
fn rotate_by_zero_is_identity_and_completes() {
    let task = make_rotate_task(0.0, Environment::ring(3)).unwrap();
    for input in ["000", "010", "111"] {
        let t = trace(&task, input);
        assert!(t.terminated);
        assert_eq!(t.stop, StopReason::Completed);
        assert_eq!(t.steps(), task.run_length.unwrap());
        assert!(t.steps() <= 20);
        assert_eq!(env(t.last()), input);
        assert_eq!(t.last().control(), 0);
        assert_eq!(t.last().output(), CODE_COMPLETE);
    }
}

#[test]
fn rotate_by_pi_flips_zero_to_one() {
    let task = make_rotate_task(PI, Environment::ring(3)).unwrap();
    let t = trace(&task, "000");
    assert_eq!(env(t.last()), "100");
    assert_eq!(*t.amplitudes.last().unwrap(), c(1.0));
    let t = trace(&task, "100");
    assert_eq!(env(t.last()), "000");
    assert_eq!(*t.amplitudes.last().unwrap(), c(-1.0));
}

#[test]
fn rotate_by_half_pi_matches_the_rotation_matrix() {
    let task = make_rotate_task(FRAC_PI_2, Environment::ring(2)).unwrap();
    let out = run_superposition(&task, &[("00", c(1.0))]);
    let amps: Vec<(String, Complex64)> = out.iter().map(|(cfg, a)| (env(cfg), *a)).collect();
    assert_eq!(amps.len(), 2);
    let (ca, sa) = ((PI / 4.0).cos(), (PI / 4.0).sin());
    assert_eq!(amps[0].0, "00");
    assert_eq!(amps[1].0, "10");
    assert!((amps[0].1 - c(ca)).norm() < 1e-15);
    assert!((amps[1].1 - c(sa)).norm() < 1e-15);
}

#[test]
fn search_walks_zeros_until_a_one() {
    let task = make_search_zeros_task(c(1.0), c(0.0), Environment::ring(4)).unwrap();
    let t = trace(&task, "0001");
    assert!(t.terminated);
    let search_sites: Vec<usize> = t
        .configurations
        .iter()
        .filter(|cfg| cfg.control() == 1 && cfg.output() == CODE_SEARCH)
        .map(|cfg| cfg.j())
        .collect();
    assert_eq!(search_sites, vec![0, 1, 2, 3]);
    let last_search = t
        .configurations
        .windows(2)
        .find(|w| w[0].output() == CODE_SEARCH && w[0].control() == 1 && w[1].control() == 0)
        .unwrap();
    assert_eq!(last_search[1].j(), 3);
    assert_eq!(env(t.last()), "0001");
    assert_eq!(t.last().control(), 0);
}

#[test]
fn search_on_an_immediate_one_does_not_move() {
    let task = make_search_zeros_task(c(1.0), c(0.0), Environment::ring(3)).unwrap();
    let t = trace(&task, "100");
    let search: Vec<&Configuration> = t
        .configurations
        .iter()
        .filter(|cfg| cfg.control() == 1 && cfg.output() == CODE_SEARCH)
        .collect();
    assert_eq!(search.len(), 1);
    assert_eq!(search[0].j(), 0);
    assert!(t.terminated);
    assert_eq!(env(t.last()), "100");
}

#[test]
fn search_on_all_zeros_never_halts() {
    let task = make_search_zeros_task(c(1.0), c(0.0), Environment::ring(4)).unwrap();
    let t = classical_trace(&task, &task.input("0000").unwrap(), 200).unwrap();
    assert!(!t.terminated);
    assert_eq!(t.stop, StopReason::StepLimit);
    assert_eq!(t.steps(), 200);
}

#[test]
fn balanced_search_entangles_environment_and_robot() {
    let h = FRAC_1_SQRT_2;
    let task = make_search_zeros_task(c(h), c(h), Environment::ring(3)).unwrap();
    let g = task.geometry;
    let op = task.step_operator().unwrap();
    let action = op.action_part();
    let start = Configuration::start(&g, CODE_SEARCH, 0, "001".parse().unwrap())
        .unwrap()
        .with_registers(CODE_START, CODE_SEARCH)
        .with_control(1);
    let psi = QuantumState::basis(g, start).unwrap();
    let direct = iterate_step(&action, &psi, 3).unwrap().pop().unwrap();

    let basis = Arc::new(enumerate_reachable([start], &action, 100_000).unwrap());
    let m = to_matrix(&action, &basis).unwrap();
    let via_matrix = iterate_step(&m, &psi, 3).unwrap().pop().unwrap();
    assert!(direct.max_abs_diff(&via_matrix) < 1e-15);

    assert_eq!(direct.len(), 4);
    for (cfg, a) in direct.iter() {
        assert!((a - c(0.5)).norm() < 1e-15);
        assert_eq!(cfg.j(), 2);
        assert_eq!(cfg.control(), 0);
    }
    let envs: Vec<String> = direct.support().map(env).collect();
    assert_eq!(envs, vec!["001", "011", "101", "111"]);

    // After two steps the walk is still in progress on all four branches.
    let mid = iterate_step(&action, &psi, 2).unwrap().pop().unwrap();
    assert_eq!(mid.len(), 4);

    let err = classical_trace(&task, &task.input("001").unwrap(), 100).unwrap_err();
    assert!(matches!(err, Error::Nondeterministic { branches: 2, .. }));
}

#[test]
fn copy_of_basis_inputs() {
    let task = make_copy_task(
        SiteRange::new(0, 2),
        SiteRange::new(2, 2),
        Environment::ring(4),
    )
    .unwrap();
    for x in ["00", "01", "10", "11"] {
        let t = trace(&task, &format!("{x}00"));
        assert!(t.terminated);
        assert_eq!(t.steps(), task.run_length.unwrap());
        assert_eq!(env(t.last()), format!("{x}{x}"));
    }
}

#[test]
fn copy_of_a_bell_pair_region() {
    let task = make_copy_task(
        SiteRange::new(0, 2),
        SiteRange::new(2, 2),
        Environment::ring(4),
    )
    .unwrap();
    let h = FRAC_1_SQRT_2;
    let out = run_superposition(&task, &[("0000", c(h)), ("1100", c(h))]);
    let amps = env_amplitudes(&out);
    assert_eq!(amps.len(), 2);
    assert_eq!(amps[0].0, "0000");
    assert_eq!(amps[1].0, "1111");
    for (_, a) in amps {
        assert!((a - c(h)).norm() < 1e-12);
    }
}

#[test]
fn copy_of_a_single_qubit_entangles_instead_of_cloning() {
    let task = make_copy_task(
        SiteRange::new(0, 1),
        SiteRange::new(1, 1),
        Environment::ring(2),
    )
    .unwrap();
    let out = run_superposition(&task, &[("00", c(0.6)), ("10", c(0.8))]);
    let amps = env_amplitudes(&out);
    let lookup = |s: &str| {
        amps.iter()
            .find(|(e, _)| e == s)
            .map_or(Complex64::default(), |(_, a)| *a)
    };
    assert!((lookup("00") - c(0.6)).norm() < 1e-12);
    assert!((lookup("11") - c(0.8)).norm() < 1e-12);
    assert_eq!(lookup("01"), Complex64::default());
    assert_eq!(lookup("10"), Complex64::default());

    // Overlap with the clone (0.6|0⟩ + 0.8|1⟩)⊗(0.6|0⟩ + 0.8|1⟩).
    let single = [0.6, 0.8];
    let mut overlap = Complex64::default();
    for a in 0..2 {
        for b in 0..2 {
            overlap += c(single[a] * single[b]) * lookup(&format!("{a}{b}"));
        }
    }
    let fidelity = overlap.norm_sqr();
    assert!((fidelity - 0.728f64.powi(2)).abs() < 1e-12);
    assert!(fidelity < 1.0 - 1e-3);
}

#[test]
fn overlapping_regions_are_rejected() {
    let err = make_copy_task(
        SiteRange::new(0, 2),
        SiteRange::new(1, 2),
        Environment::ring(4),
    );
    assert!(matches!(err, Err(Error::Task(_))));
    let err = make_copy_task(
        SiteRange::new(0, 2),
        SiteRange::new(2, 1),
        Environment::ring(4),
    );
    assert!(matches!(err, Err(Error::Task(_))));
}

#[test]
fn copy_towards_the_left() {
    let task = make_copy_task(
        SiteRange::new(3, 2),
        SiteRange::new(0, 2),
        Environment::ring(5),
    )
    .unwrap();
    let t = trace(&task, "00010");
    assert!(t.terminated);
    assert_eq!(env(t.last()), "10010");
}

#[test]
fn cleanup_basis_and_superposition() {
    let task = make_cleanup_task(
        SiteRange::new(0, 2),
        SiteRange::new(2, 2),
        "00".parse().unwrap(),
        Environment::ring(4),
    )
    .unwrap();
    assert_eq!(env(trace(&task, "1100").last()), "0011");

    let amps_in = [("0100", c(0.6)), ("1000", Complex64::new(0.0, 0.8))];
    let out = run_superposition(&task, &amps_in);
    let amps = env_amplitudes(&out);
    assert_eq!(amps.len(), 2);
    assert_eq!(amps[0].0, "0001");
    assert_eq!(amps[1].0, "0010");
    assert!((amps[0].1 - c(0.6)).norm() < 1e-12);
    assert!((amps[1].1 - Complex64::new(0.0, 0.8)).norm() < 1e-12);
}

#[test]
fn cleanup_to_a_nonzero_pattern_is_unitary_on_its_inputs() {
    let task = make_cleanup_task(
        SiteRange::new(0, 2),
        SiteRange::new(2, 2),
        "10".parse().unwrap(),
        Environment::ring(4),
    )
    .unwrap();
    let inputs: Vec<Configuration> = ["0000", "0100", "1000", "1100"]
        .iter()
        .map(|s| task.input(s).unwrap())
        .collect();
    let block = transfer_block(&task, &inputs, MAX_STEPS).unwrap();
    assert_eq!(block.outputs.len(), 4);
    assert!(check_unitarity_dense(&block.matrix) < 1e-12);
    let envs: Vec<String> = block.outputs.iter().map(env).collect();
    assert_eq!(envs, vec!["1000", "1001", "1010", "1011"]);
}

#[test]
fn shift_moves_a_pattern_into_an_empty_window() {
    let task = make_shift_task(SiteRange::new(0, 2), 3, Environment::ring(6)).unwrap();
    let t = trace(&task, "110000");
    assert!(t.terminated);
    assert_eq!(env(t.last()), "000110");
    for input in ["010000", "100000", "000000"] {
        let t = trace(&task, input);
        let expected = format!("000{}0", &input[..2]);
        assert_eq!(env(t.last()), expected);
    }
}

#[test]
fn shift_leaves_an_occupied_destination_alone() {
    let task = make_shift_task(SiteRange::new(0, 2), 3, Environment::ring(6)).unwrap();
    for input in ["110100", "110010", "000001"] {
        let t = trace(&task, input);
        assert!(t.terminated, "{input}");
        assert_eq!(env(t.last()), input);
    }
}

#[test]
fn shift_of_a_superposition_is_componentwise() {
    let task = make_shift_task(SiteRange::new(0, 2), 3, Environment::ring(6)).unwrap();
    let op = task.step_operator().unwrap();
    let inputs = [("110000", c(0.6)), ("110100", c(0.8))];
    let pairs: Vec<(Configuration, Complex64)> = inputs
        .iter()
        .map(|(s, a)| (task.input(s).unwrap(), *a))
        .collect();
    let psi = QuantumState::from_pairs(task.geometry, pairs.clone()).unwrap();
    let n = 60;
    let basis = Arc::new(enumerate_reachable(pairs.iter().map(|p| p.0), &op, 100_000).unwrap());
    let m = to_matrix(&op, &basis).unwrap();
    let together = iterate_step(&m, &psi, n).unwrap().pop().unwrap();
    let mut separate = QuantumState::zero(task.geometry);
    for (cfg, a) in &pairs {
        let part = iterate_step(&op, &QuantumState::basis(task.geometry, *cfg).unwrap(), n)
            .unwrap()
            .pop()
            .unwrap();
        separate = separate.add_scaled(&part, *a).unwrap();
    }
    assert!(together.max_abs_diff(&separate) < 1e-12);
}

#[test]
fn shift_rejects_overlapping_destination() {
    assert!(make_shift_task(SiteRange::new(0, 3), 2, Environment::ring(8)).is_err());
    assert!(make_shift_task(SiteRange::new(0, 2), 3, Environment::ring(4)).is_err());
}

#[test]
fn traces_alternate_phases_and_restore_the_frame() {
    let tasks = [
        (make_rotate_task(0.0, Environment::ring(3)).unwrap(), "010"),
        (
            make_search_zeros_task(c(1.0), c(0.0), Environment::ring(4)).unwrap(),
            "0010",
        ),
        (
            make_copy_task(
                SiteRange::new(0, 1),
                SiteRange::new(1, 1),
                Environment::ring(3),
            )
            .unwrap(),
            "100",
        ),
    ];
    for (task, input) in &tasks {
        let t = trace(task, input);
        let op = task.step_operator().unwrap();
        for w in t.configurations.windows(2) {
            let (a, b) = (w[0], w[1]);
            let rule = op.firing_rules(&a);
            assert_eq!(rule.len(), 1);
            assert_eq!(rule[0].phase.active_control(), a.control());
            if a.control() == 0 && b.control() == 1 {
                assert!(b.onboard_at_rest());
                assert_eq!(b.memory(), a.output());
            }
        }
    }
}

#[test]
fn task_params_round_trip_through_json() {
    let params = TaskParams::Shift {
        region: SiteRange::new(0, 2),
        offset: 3,
    };
    let text = serde_json::to_string(&params).unwrap();
    assert_eq!(
        text,
        r#"{"name":"shift","params":{"region":{"start":0,"len":2},"offset":3}}"#
    );
    let back: TaskParams =
        serde_json::from_str(r#"{"name":"shift","params":{"region":{"start":0,"len":2}}}"#)
            .unwrap();
    assert_eq!(back, params);
}
