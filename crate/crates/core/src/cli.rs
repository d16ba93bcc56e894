//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when violations are found (`validate`, or
//! `run --strict`), 2 for any other error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dynamics::{build_hamiltonian, evolve_series, EvolutionMethod};
use crate::error::{Error, Result};
use crate::lattice::Boundary;
use crate::scenario::{Dynamics, Model, Scenario};
use crate::tasks::classical_trace_with;
use crate::validate::{
    audit, check_env_locality, check_gating_and_diagonality, check_homogeneity,
    check_onboard_locality, translation_orbit, write_jsonl, Translation, ViolationReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qrobot", version, about = "Quantum robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve the initial state under H and write amplitude and marginal CSVs.
    Run(Options),
    /// Scan the compiled matrices for structural violations.
    Validate(Options),
    /// Follow a deterministic run step by step.
    Trace(Options),
}

#[derive(Debug, Args)]
struct Options {
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for result files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_dim: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Refuse to evolve an operator with structural violations.
    #[arg(long)]
    strict: bool,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Options {
    fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::load(&self.scenario).map_err(|e| match e {
            Error::Json(err) => Error::Scenario(format!("{}: {err}", self.scenario.display())),
            other => other,
        })?;
        if let Some(m) = &self.method {
            s.method = m.clone();
        }
        if let Some(tol) = self.tol {
            s.tol = tol;
        }
        if let Some(d) = self.max_dim {
            s.max_dim = d;
        }
        if let Some(n) = self.max_steps {
            s.max_steps = n;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Run(o) => run(o),
        Command::Validate(o) => validate(o),
        Command::Trace(o) => trace(o),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Structural audit on a translation-closed basis around the initial state.
pub fn violations(model: &Model, max_dim: usize) -> Result<Vec<ViolationReport>> {
    let seeds = translation_orbit(&model.geometry, model.initial.support());
    let basis = model.basis(seeds, max_dim)?;
    match &model.dynamics {
        Dynamics::Rules(op) => audit(op, &basis),
        Dynamics::Explicit(_) => {
            let m = model.matrices(&basis)?;
            let mut out = check_env_locality(&m.full);
            out.extend(check_onboard_locality(&m.computation));
            out.extend(check_gating_and_diagonality(&m.action, &m.computation));
            let mut translations = vec![Translation::OnboardK];
            if model.geometry.env_boundary() == Boundary::Cyclic {
                translations.insert(0, Translation::EnvJ);
            }
            for which in translations {
                match check_homogeneity(&m.full, which) {
                    Ok(r) => out.extend(r),
                    Err(Error::NotInBasis(what)) => {
                        eprintln!("note: {which:?} homogeneity skipped, basis misses {what}")
                    }
                    Err(e) => return Err(e),
                }
            }
            out.sort_by(|a, b| {
                (a.condition, a.row, a.column, a.explanation.as_str()).cmp(&(
                    b.condition,
                    b.row,
                    b.column,
                    b.explanation.as_str(),
                ))
            });
            Ok(out)
        }
    }
}

fn report(reports: &[ViolationReport]) {
    for r in reports {
        eprintln!(
            "violation: {} at <{}|T|{}>: {}",
            r.condition, r.row, r.column, r.explanation
        );
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    dimension: usize,
    coupling: f64,
    method: &'a str,
    tol: f64,
    times: &'a [f64],
    norm_drift: &'a [f64],
}

fn run(o: &Options) -> Result<i32> {
    let scenario = o.scenario()?;
    let model = scenario.model()?;
    if o.strict {
        let reports = violations(&model, scenario.max_dim)?;
        if !reports.is_empty() {
            report(&reports);
            eprintln!("{} violation(s); not evolving", reports.len());
            return Ok(EXIT_VIOLATIONS);
        }
    }
    let basis = model.basis(model.initial.support().copied(), scenario.max_dim)?;
    let matrices = model.matrices(&basis)?;
    let h = build_hamiltonian(&matrices.full, scenario.coupling)?;
    let method = EvolutionMethod::from_name(&scenario.method, h.dim())?;
    let result = evolve_series(&h, &model.initial, &scenario.times, method, scenario.tol)?;

    let mut w = o.create(&scenario.outputs.states)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let mut w = o.create(&scenario.outputs.marginals)?;
    result.write_marginals_csv(&mut w, &scenario.selectors)?;
    w.flush()?;
    let mut w = o.create(&scenario.outputs.summary)?;
    serde_json::to_writer_pretty(
        &mut w,
        &RunSummary {
            dimension: h.dim(),
            coupling: h.coupling(),
            method: method.name(),
            tol: scenario.tol,
            times: &result.times,
            norm_drift: &result.norm_drift,
        },
    )?;
    w.write_all(b"\n")?;
    w.flush()?;
    eprintln!(
        "evolved dimension {} with {} to {} time(s)",
        h.dim(),
        method.name(),
        result.times.len()
    );
    Ok(EXIT_OK)
}

fn validate(o: &Options) -> Result<i32> {
    let scenario = o.scenario()?;
    let model = scenario.model()?;
    let reports = violations(&model, scenario.max_dim)?;
    let mut w = o.create(&scenario.outputs.violations)?;
    write_jsonl(&mut w, &reports)?;
    w.flush()?;
    if reports.is_empty() {
        eprintln!("no violations");
        Ok(EXIT_OK)
    } else {
        report(&reports);
        Ok(EXIT_VIOLATIONS)
    }
}

fn trace(o: &Options) -> Result<i32> {
    let scenario = o.scenario()?;
    let model = scenario.model()?;
    let op = model
        .step_operator()
        .ok_or_else(|| Error::Scenario("trace needs a task or inline rules".into()))?;
    let (start, _) = model.initial.as_single(0.0).ok_or_else(|| {
        Error::Scenario("trace needs a single basis configuration as initial state".into())
    })?;
    let t = classical_trace_with(op, &model.final_outputs, &start, scenario.max_steps)?;
    let mut w = o.create(&scenario.outputs.trace)?;
    t.write_jsonl(&mut w)?;
    w.flush()?;
    if t.terminated {
        eprintln!("completed after {} steps", t.steps());
    } else {
        eprintln!(
            "non-halting: stopped after {} steps ({:?})",
            t.steps(),
            t.stop
        );
    }
    Ok(EXIT_OK)
}
