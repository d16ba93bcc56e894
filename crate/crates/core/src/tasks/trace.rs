//! Deterministic interpreter used as an oracle for matrix-level results.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::rules::StepOperator;

use super::TaskSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The completion action fired on a final output value.
    Completed,
    /// No rule fires (for example a sink code or a bounded edge).
    NoTransition,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalTrace {
    pub configurations: Vec<Configuration>,
    /// Accumulated amplitude of each configuration relative to the start.
    pub amplitudes: Vec<Complex64>,
    pub terminated: bool,
    pub stop: StopReason,
}

impl ClassicalTrace {
    pub fn steps(&self) -> usize {
        self.configurations.len() - 1
    }

    pub fn last(&self) -> &Configuration {
        self.configurations.last().expect("trace is never empty")
    }

    /// One JSON object per configuration, then a summary line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            step: usize,
            configuration: &'a Configuration,
            amplitude: Complex64,
        }
        #[derive(Serialize)]
        struct Summary {
            steps: usize,
            terminated: bool,
            stop: StopReason,
        }
        for (step, (configuration, amplitude)) in
            self.configurations.iter().zip(&self.amplitudes).enumerate()
        {
            serde_json::to_writer(
                &mut w,
                &Line {
                    step,
                    configuration,
                    amplitude: *amplitude,
                },
            )?;
            w.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut w,
            &Summary {
                steps: self.steps(),
                terminated: self.terminated,
                stop: self.stop,
            },
        )?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

/// Runs `task` from `initial` for at most `max_steps` applications of `T`.
pub fn classical_trace(
    task: &TaskSpec,
    initial: &Configuration,
    max_steps: usize,
) -> Result<ClassicalTrace> {
    let op = task.step_operator()?;
    classical_trace_with(&op, &task.final_outputs, initial, max_steps)
}

/// As [`classical_trace`] for an already compiled operator.
pub fn classical_trace_with(
    op: &StepOperator,
    final_outputs: &[usize],
    initial: &Configuration,
    max_steps: usize,
) -> Result<ClassicalTrace> {
    initial.validate(op.geometry())?;
    let mut configurations = vec![*initial];
    let mut amplitudes = vec![Complex64::new(1.0, 0.0)];
    let mut cfg = *initial;
    for _ in 0..max_steps {
        let image = op.image(&cfg);
        let (next, amp) = match image.as_slice() {
            [] => {
                return Ok(ClassicalTrace {
                    configurations,
                    amplitudes,
                    terminated: false,
                    stop: StopReason::NoTransition,
                })
            }
            [single] => *single,
            _ => {
                return Err(Error::Nondeterministic {
                    context: cfg.to_string(),
                    branches: image.len(),
                })
            }
        };
        let completing = cfg.control() == 1 && final_outputs.contains(&cfg.output());
        let total = amplitudes.last().copied().unwrap_or_default() * amp;
        configurations.push(next);
        amplitudes.push(total);
        cfg = next;
        if completing {
            return Ok(ClassicalTrace {
                configurations,
                amplitudes,
                terminated: true,
                stop: StopReason::Completed,
            });
        }
    }
    Ok(ClassicalTrace {
        configurations,
        amplitudes,
        terminated: false,
        stop: StopReason::StepLimit,
    })
}

/// Input-to-output map of a deterministic task: column `i` holds the final
/// amplitude of `inputs[i]` at the row of its final configuration.
#[derive(Clone, Debug)]
pub struct TransferBlock {
    pub inputs: Vec<Configuration>,
    pub outputs: Vec<Configuration>,
    pub matrix: DMatrix<Complex64>,
}

pub fn transfer_block(
    task: &TaskSpec,
    inputs: &[Configuration],
    max_steps: usize,
) -> Result<TransferBlock> {
    let op = task.step_operator()?;
    let mut finals = Vec::with_capacity(inputs.len());
    for input in inputs {
        let trace = classical_trace_with(&op, &task.final_outputs, input, max_steps)?;
        if !trace.terminated {
            return Err(Error::Task(format!(
                "run from {input} stopped without completing ({:?})",
                trace.stop
            )));
        }
        finals.push((*trace.last(), *trace.amplitudes.last().expect("non-empty")));
    }
    let outputs: Vec<Configuration> = finals
        .iter()
        .map(|(c, _)| *c)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut matrix = DMatrix::zeros(outputs.len(), inputs.len());
    for (col, (cfg, amp)) in finals.iter().enumerate() {
        let row = outputs.binary_search(cfg).expect("collected above");
        matrix[(row, col)] = *amp;
    }
    Ok(TransferBlock {
        inputs: inputs.to_vec(),
        outputs,
        matrix,
    })
}
