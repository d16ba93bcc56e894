//! Sparse state vectors over the configuration basis and their marginals.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BitString, Configuration, LatticeGeometry};

/// Amplitudes at or below this modulus are dropped after arithmetic.
pub const PRUNE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    geometry: LatticeGeometry,
    amplitudes: BTreeMap<Configuration, Complex64>,
}

impl QuantumState {
    pub fn zero(geometry: LatticeGeometry) -> Self {
        Self {
            geometry,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn basis(geometry: LatticeGeometry, cfg: Configuration) -> Result<Self> {
        cfg.validate(&geometry)?;
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(cfg, Complex64::new(1.0, 0.0));
        Ok(Self {
            geometry,
            amplitudes,
        })
    }

    /// Builds a state from (configuration, amplitude) pairs; repeated
    /// configurations are summed. The result is not normalized.
    pub fn from_pairs<I>(geometry: LatticeGeometry, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Configuration, Complex64)>,
    {
        let mut acc = Accumulator::default();
        for (cfg, amp) in pairs {
            cfg.validate(&geometry)?;
            acc.add(cfg, amp);
        }
        Ok(acc.finish(geometry))
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitude(&self, cfg: &Configuration) -> Complex64 {
        self.amplitudes.get(cfg).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Configuration> {
        self.amplitudes.keys()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Unit-norm copy. States already normalized to 1e-12 are returned
    /// unchanged, which makes the operation idempotent bit for bit.
    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        if (n2 - 1.0).abs() <= 1e-12 {
            return Ok(self.clone());
        }
        Ok(self.scale(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &QuantumState) -> Result<Complex64> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut sum = Complex64::default();
        for (cfg, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(cfg) {
                sum += if conj_small {
                    a.conj() * b
                } else {
                    b.conj() * a
                };
            }
        }
        Ok(sum)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut acc = Accumulator::default();
        for (cfg, amp) in &self.amplitudes {
            acc.add(*cfg, amp * factor);
        }
        acc.finish(self.geometry)
    }

    /// `self + factor·other`.
    pub fn add_scaled(&self, other: &QuantumState, factor: Complex64) -> Result<Self> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch);
        }
        let mut acc = Accumulator::default();
        for (cfg, amp) in &self.amplitudes {
            acc.add(*cfg, *amp);
        }
        for (cfg, amp) in &other.amplitudes {
            acc.add(*cfg, amp * factor);
        }
        Ok(acc.finish(self.geometry))
    }

    /// Largest amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &QuantumState) -> f64 {
        let mut worst: f64 = 0.0;
        for (cfg, a) in &self.amplitudes {
            worst = worst.max((a - other.amplitude(cfg)).norm());
        }
        for (cfg, b) in &other.amplitudes {
            if !self.amplitudes.contains_key(cfg) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }

    /// If the state is (to `tol`) a single basis configuration, returns it
    /// with its amplitude.
    pub fn as_single(&self, tol: f64) -> Option<(Configuration, Complex64)> {
        let mut significant = self.amplitudes.iter().filter(|(_, a)| a.norm() > tol);
        let first = significant.next()?;
        significant.next().is_none().then_some((*first.0, *first.1))
    }

    pub fn marginal(&self, selector: MarginalSelector) -> BTreeMap<MarginalValue, f64> {
        let mut out = BTreeMap::new();
        for (cfg, amp) in &self.amplitudes {
            *out.entry(selector.value_of(cfg)).or_insert(0.0) += amp.norm_sqr();
        }
        out
    }
}

/// Sparse sum with pruning applied once at the end.
#[derive(Default)]
pub(crate) struct Accumulator {
    map: BTreeMap<Configuration, Complex64>,
}

impl Accumulator {
    pub(crate) fn add(&mut self, cfg: Configuration, amp: Complex64) {
        *self.map.entry(cfg).or_default() += amp;
    }

    pub(crate) fn finish(mut self, geometry: LatticeGeometry) -> QuantumState {
        self.map.retain(|_, a| a.norm() > PRUNE);
        QuantumState {
            geometry,
            amplitudes: self.map,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalSelector {
    RobotPosition,
    ControlBit,
    EnvString,
    OutputRegister,
    MemoryRegister,
}

impl MarginalSelector {
    pub const ALL: [MarginalSelector; 5] = [
        MarginalSelector::RobotPosition,
        MarginalSelector::ControlBit,
        MarginalSelector::EnvString,
        MarginalSelector::OutputRegister,
        MarginalSelector::MemoryRegister,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MarginalSelector::RobotPosition => "robot_position",
            MarginalSelector::ControlBit => "control_bit",
            MarginalSelector::EnvString => "env_string",
            MarginalSelector::OutputRegister => "output_register",
            MarginalSelector::MemoryRegister => "memory_register",
        }
    }

    pub fn value_of(&self, cfg: &Configuration) -> MarginalValue {
        match self {
            MarginalSelector::RobotPosition => MarginalValue::Index(cfg.j()),
            MarginalSelector::ControlBit => MarginalValue::Index(cfg.control() as usize),
            MarginalSelector::EnvString => MarginalValue::Bits(cfg.s()),
            MarginalSelector::OutputRegister => MarginalValue::Index(cfg.output()),
            MarginalSelector::MemoryRegister => MarginalValue::Index(cfg.memory()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MarginalValue {
    Index(usize),
    Bits(BitString),
}

impl fmt::Display for MarginalValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalValue::Index(i) => write!(f, "{i}"),
            MarginalValue::Bits(b) => write!(f, "{b}"),
        }
    }
}
