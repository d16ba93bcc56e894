//! Versioned JSON scenario files and the models they describe.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_reachable, BasisEnumeration};
use crate::error::{Error, Result};
use crate::lattice::{BitString, Configuration, LatticeGeometry};
use crate::operator::SparseOperator;
use crate::rules::{RuleFile, StepOperator};
use crate::state::{MarginalSelector, QuantumState};
use crate::tasks::{Environment, TaskParams, TaskSpec, CODE_START};

pub const SCENARIO_VERSION: u32 = 1;

fn default_coupling() -> f64 {
    1.0
}
fn default_times() -> Vec<f64> {
    vec![0.0]
}
fn default_method() -> String {
    "auto".into()
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_dim() -> usize {
    100_000
}
fn default_max_steps() -> usize {
    10_000
}
fn default_selectors() -> Vec<MarginalSelector> {
    MarginalSelector::ALL.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    /// Environment for a built-in task.
    #[serde(default)]
    pub environment: Option<Environment>,
    /// Full geometry for inline rules or an explicit operator.
    #[serde(default)]
    pub geometry: Option<LatticeGeometry>,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default)]
    pub task: Option<TaskParams>,
    #[serde(default)]
    pub rules: Option<RuleFile>,
    #[serde(default)]
    pub operator: Option<ExplicitOperator>,
    /// Completion flags for inline rules (built-in tasks bring their own).
    #[serde(default)]
    pub final_outputs: Vec<usize>,
    pub initial: InitialState,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// `auto`, `dense_eigen`, `krylov` or `scaled_taylor`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default = "default_selectors")]
    pub selectors: Vec<MarginalSelector>,
}

/// Hand-written matrix elements `[row, column, [re, im]]`, split into the
/// computation and action parts.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitOperator {
    #[serde(default)]
    pub computation: Vec<(Configuration, Configuration, Complex64)>,
    #[serde(default)]
    pub action: Vec<(Configuration, Configuration, Complex64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Task start configuration over this environment string.
    Environment(BitString),
    Configuration(Configuration),
    /// Normalized on load.
    Amplitudes(Vec<(Configuration, Complex64)>),
    /// Task start configurations over the listed environments with random
    /// complex weights drawn from the scenario seed.
    RandomSuperposition {
        environments: Vec<BitString>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub states: String,
    pub marginals: String,
    pub summary: String,
    pub violations: String,
    pub trace: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            states: "states.csv".into(),
            marginals: "marginals.csv".into(),
            summary: "summary.json".into(),
            violations: "violations.jsonl".into(),
            trace: "trace.jsonl".into(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::Scenario(format!(
                "unsupported version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        let sources = [
            self.task.is_some(),
            self.rules.is_some(),
            self.operator.is_some(),
        ];
        if sources.iter().filter(|x| **x).count() != 1 {
            return Err(Error::Scenario(
                "exactly one of `task`, `rules` or `operator` must be given".into(),
            ));
        }
        if self.task.is_some() && self.environment.is_none() {
            return Err(Error::Scenario(
                "a built-in task needs `environment`".into(),
            ));
        }
        if self.task.is_none() && self.geometry.is_none() {
            return Err(Error::Scenario(
                "inline rules and explicit operators need `geometry`".into(),
            ));
        }
        if self.max_dim == 0 {
            return Err(Error::Scenario("max_dim must be at least 1".into()));
        }
        if self.times.iter().any(|t| !t.is_finite() || *t < 0.0)
            || self.times.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::Times);
        }
        Ok(())
    }

    /// Compiles the described model.
    pub fn model(&self) -> Result<Model> {
        if let Some(params) = &self.task {
            let env = self.environment.expect("checked");
            let task = params.build(env)?;
            let initial = self.initial_state(&task.geometry, Some(&task))?;
            return Ok(Model {
                geometry: task.geometry,
                dynamics: Dynamics::Rules(task.step_operator()?),
                final_outputs: task.final_outputs.clone(),
                initial,
                task: Some(task),
            });
        }
        let geometry = self.geometry.expect("checked");
        let initial = self.initial_state(&geometry, None)?;
        let dynamics = if let Some(rules) = &self.rules {
            Dynamics::Rules(StepOperator::compile(
                rules.computation.clone(),
                rules.action.clone(),
                geometry,
                rules.options,
            )?)
        } else {
            Dynamics::Explicit(self.operator.clone().expect("checked"))
        };
        Ok(Model {
            geometry,
            dynamics,
            final_outputs: self.final_outputs.clone(),
            initial,
            task: None,
        })
    }

    fn initial_state(&self, g: &LatticeGeometry, task: Option<&TaskSpec>) -> Result<QuantumState> {
        let start = |env: &BitString| match task {
            Some(t) => Configuration::start(g, CODE_START, t.start_position, *env),
            None => Configuration::start(g, CODE_START, 0, *env),
        };
        let state = match &self.initial {
            InitialState::Environment(env) => QuantumState::basis(*g, start(env)?)?,
            InitialState::Configuration(cfg) => QuantumState::basis(*g, *cfg)?,
            InitialState::Amplitudes(pairs) => {
                QuantumState::from_pairs(*g, pairs.iter().copied())?.normalize()?
            }
            InitialState::RandomSuperposition { environments } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut pairs = Vec::new();
                for env in environments {
                    let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    pairs.push((start(env)?, amp));
                }
                QuantumState::from_pairs(*g, pairs)?.normalize()?
            }
        };
        Ok(state)
    }
}

#[derive(Clone, Debug)]
pub enum Dynamics {
    Rules(StepOperator),
    Explicit(ExplicitOperator),
}

#[derive(Clone, Debug)]
pub struct Model {
    pub geometry: LatticeGeometry,
    pub dynamics: Dynamics,
    pub final_outputs: Vec<usize>,
    pub initial: QuantumState,
    pub task: Option<TaskSpec>,
}

/// Matrices of a model on an enumerated basis.
pub struct Matrices {
    pub basis: Arc<BasisEnumeration>,
    pub full: SparseOperator,
    pub computation: SparseOperator,
    pub action: SparseOperator,
}

impl Model {
    /// Reachable closure of `seeds` (rule models) or the set of mentioned
    /// configurations (explicit models).
    pub fn basis<I>(&self, seeds: I, max_dim: usize) -> Result<Arc<BasisEnumeration>>
    where
        I: IntoIterator<Item = Configuration>,
    {
        let basis = match &self.dynamics {
            Dynamics::Rules(op) => enumerate_reachable(seeds, op, max_dim)?,
            Dynamics::Explicit(ex) => {
                let mentioned = ex
                    .computation
                    .iter()
                    .chain(&ex.action)
                    .flat_map(|(r, c, _)| [*r, *c])
                    .chain(seeds);
                let basis = BasisEnumeration::new(self.geometry, mentioned)?;
                if basis.len() > max_dim {
                    return Err(Error::Capacity {
                        max_dim,
                        reached: basis.len(),
                    });
                }
                basis
            }
        };
        Ok(Arc::new(basis))
    }

    pub fn matrices(&self, basis: &Arc<BasisEnumeration>) -> Result<Matrices> {
        let (computation, action) = match &self.dynamics {
            Dynamics::Rules(op) => (
                crate::operator::to_matrix(&op.computation_part(), basis)?,
                crate::operator::to_matrix(&op.action_part(), basis)?,
            ),
            Dynamics::Explicit(ex) => (
                SparseOperator::from_elements(Arc::clone(basis), ex.computation.iter().copied())?,
                SparseOperator::from_elements(Arc::clone(basis), ex.action.iter().copied())?,
            ),
        };
        let triplets = computation.iter().chain(action.iter()).collect::<Vec<_>>();
        let full = SparseOperator::from_triplets(Arc::clone(basis), triplets)?;
        Ok(Matrices {
            basis: Arc::clone(basis),
            full,
            computation,
            action,
        })
    }

    pub fn step_operator(&self) -> Option<&StepOperator> {
        match &self.dynamics {
            Dynamics::Rules(op) => Some(op),
            Dynamics::Explicit(_) => None,
        }
    }
}
