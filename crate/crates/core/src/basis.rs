//! Finite enumeration of the configurations a step operator can reach.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, LatticeGeometry};
use crate::rules::StepOperator;
use crate::state::{Accumulator, QuantumState};

/// Ordered configuration list with its inverse index.
#[derive(Clone, Debug)]
pub struct BasisEnumeration {
    geometry: LatticeGeometry,
    configs: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
}

impl BasisEnumeration {
    /// Sorted, deduplicated enumeration of `configs`.
    pub fn new<I>(geometry: LatticeGeometry, configs: I) -> Result<Self>
    where
        I: IntoIterator<Item = Configuration>,
    {
        let set: BTreeSet<Configuration> = configs.into_iter().collect();
        for cfg in &set {
            cfg.validate(&geometry)?;
        }
        let configs: Vec<Configuration> = set.into_iter().collect();
        let index = configs.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Self {
            geometry,
            configs,
            index,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Configuration> {
        self.configs.get(i)
    }

    pub fn index_of(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    pub fn contains(&self, cfg: &Configuration) -> bool {
        self.index.contains_key(cfg)
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    /// Dense coordinates of `state`; fails if its support leaves the basis.
    pub fn to_vector(&self, state: &QuantumState) -> Result<Vec<Complex64>> {
        if state.geometry() != &self.geometry {
            return Err(Error::GeometryMismatch);
        }
        let mut v = vec![Complex64::default(); self.len()];
        for (cfg, amp) in state.iter() {
            let i = self
                .index_of(cfg)
                .ok_or_else(|| Error::NotInBasis(cfg.to_string()))?;
            v[i] = *amp;
        }
        Ok(v)
    }

    pub fn to_state(&self, v: &[Complex64]) -> QuantumState {
        assert_eq!(v.len(), self.len(), "vector length does not match basis");
        let mut acc = Accumulator::default();
        for (cfg, amp) in self.configs.iter().zip(v) {
            acc.add(*cfg, *amp);
        }
        acc.finish(self.geometry)
    }
}

/// Smallest set containing `initial_support` that is closed under the
/// nonzero transitions of both `T` and `T†`.
pub fn enumerate_reachable<I>(
    initial_support: I,
    op: &StepOperator,
    max_dim: usize,
) -> Result<BasisEnumeration>
where
    I: IntoIterator<Item = Configuration>,
{
    let mut seen: BTreeSet<Configuration> = BTreeSet::new();
    let mut queue = VecDeque::new();
    let admit = |cfg: Configuration,
                 seen: &mut BTreeSet<Configuration>,
                 queue: &mut VecDeque<Configuration>|
     -> Result<()> {
        if seen.insert(cfg) {
            if seen.len() > max_dim {
                return Err(Error::Capacity {
                    max_dim,
                    reached: seen.len(),
                });
            }
            queue.push_back(cfg);
        }
        Ok(())
    };
    for cfg in initial_support {
        cfg.validate(op.geometry())?;
        admit(cfg, &mut seen, &mut queue)?;
    }
    while let Some(cfg) = queue.pop_front() {
        for (next, _) in op.image(&cfg) {
            admit(next, &mut seen, &mut queue)?;
        }
        for (prev, _) in op.preimage(&cfg) {
            admit(prev, &mut seen, &mut queue)?;
        }
    }
    BasisEnumeration::new(*op.geometry(), seen)
}
