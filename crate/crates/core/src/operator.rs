//! Sparse matrices over a [`BasisEnumeration`].

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::BasisEnumeration;
use crate::error::{Error, Result};
use crate::lattice::Configuration;
use crate::rules::StepOperator;
use crate::state::{QuantumState, PRUNE};

/// Row-compressed complex matrix; explicit zeros are never stored.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    basis: Arc<BasisEnumeration>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets. Repeated positions are
    /// summed; entries at or below the pruning threshold are dropped.
    pub fn from_triplets<I>(basis: Arc<BasisEnumeration>, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let n = basis.len();
        let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::NotInBasis(format!(
                    "index ({r}, {c}) for dimension {n}"
                )));
            }
            *acc.entry((r, c)).or_default() += v;
        }
        let mut rows = vec![Vec::new(); n];
        for ((r, c), v) in acc {
            if v.norm() > PRUNE {
                rows[r].push((c, v));
            }
        }
        Ok(Self { basis, rows })
    }

    /// Same as [`from_triplets`](Self::from_triplets) but addressed by
    /// configuration.
    pub fn from_elements<I>(basis: Arc<BasisEnumeration>, elements: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Configuration, Configuration, Complex64)>,
    {
        let mut triplets = Vec::new();
        for (row, col, v) in elements {
            let r = basis
                .index_of(&row)
                .ok_or_else(|| Error::NotInBasis(row.to_string()))?;
            let c = basis
                .index_of(&col)
                .ok_or_else(|| Error::NotInBasis(col.to_string()))?;
            triplets.push((r, c, v));
        }
        Self::from_triplets(basis, triplets)
    }

    /// Sparse copy of a dense matrix; the matrix must be square and match
    /// the basis dimension.
    pub fn from_dense(basis: Arc<BasisEnumeration>, m: &DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() != basis.len() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let triplets = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, m[(r, c)]))
            .collect::<Vec<_>>();
        Self::from_triplets(basis, triplets)
    }

    pub fn identity(basis: Arc<BasisEnumeration>) -> Self {
        let rows = (0..basis.len())
            .map(|i| vec![(i, Complex64::new(1.0, 0.0))])
            .collect();
        Self { basis, rows }
    }

    pub fn basis(&self) -> &Arc<BasisEnumeration> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rows[r]
            .binary_search_by_key(&c, |&(col, _)| col)
            .map(|pos| self.rows[r][pos].1)
            .unwrap_or_default()
    }

    pub fn row(&self, r: usize) -> &[(usize, Complex64)] {
        &self.rows[r]
    }

    /// Nonzero elements in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim());
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, a)| a * v[c]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.dim()];
        for (r, c, v) in self.iter() {
            rows[c].push((r, v.conj()));
        }
        // Row-major iteration already yields ascending r within each new row.
        Self {
            basis: Arc::clone(&self.basis),
            rows,
        }
    }

    /// Largest element of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Max column sum of absolute values.
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.dim()];
        for (_, c, v) in self.iter() {
            cols[c] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Matrix action on a sparse state whose support lies in the basis.
    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        let v = self.basis.to_vector(state)?;
        Ok(self.basis.to_state(&self.matvec(&v)))
    }

    pub fn config(&self, i: usize) -> &Configuration {
        self.basis.get(i).expect("index within basis")
    }
}

/// Matrix of `op` on `basis`. The basis must be closed under both `T` and
/// `T†`; otherwise the first escaping transition is reported.
pub fn to_matrix(op: &StepOperator, basis: &Arc<BasisEnumeration>) -> Result<SparseOperator> {
    if basis.geometry() != op.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let mut triplets = Vec::new();
    for (col, cfg) in basis.configs().iter().enumerate() {
        for (next, amp) in op.image(cfg) {
            let row = basis.index_of(&next).ok_or_else(|| Error::NotClosed {
                from: cfg.to_string(),
                to: next.to_string(),
            })?;
            triplets.push((row, col, amp));
        }
        for (prev, _) in op.preimage(cfg) {
            if !basis.contains(&prev) {
                return Err(Error::NotClosed {
                    from: prev.to_string(),
                    to: cfg.to_string(),
                });
            }
        }
    }
    SparseOperator::from_triplets(Arc::clone(basis), triplets)
}
