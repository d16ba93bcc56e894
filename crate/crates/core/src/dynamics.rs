//! Continuous-time evolution under `H = K(2 - T - T†)` and discrete
//! iteration of the step operator.

use std::fmt;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisEnumeration;
use crate::error::{Error, Result};
use crate::operator::SparseOperator;
use crate::rules::StepOperator;
use crate::state::{MarginalSelector, QuantumState};

/// Dimension up to which [`EvolutionMethod::auto`] picks dense diagonalization.
pub const DENSE_LIMIT: usize = 4096;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

#[derive(Debug)]
struct Eigen {
    values: DVector<f64>,
    vectors: DMatrix<C>,
}

/// Self-adjoint generator with a lazily cached eigendecomposition.
#[derive(Debug)]
pub struct Hamiltonian {
    coupling: f64,
    matrix: SparseOperator,
    eigen: OnceLock<Eigen>,
}

/// `H = K(2·I - T - T†)`. Elements are computed once per unordered pair and
/// mirrored, so `H` equals its adjoint bit for bit.
pub fn build_hamiltonian(t: &SparseOperator, coupling: f64) -> Result<Hamiltonian> {
    if !(coupling.is_finite() && coupling > 0.0) {
        return Err(Error::Coupling(coupling));
    }
    let mut pairs = std::collections::BTreeSet::new();
    for (r, c, _) in t.iter() {
        pairs.insert((r.min(c), r.max(c)));
    }
    for i in 0..t.dim() {
        pairs.insert((i, i));
    }
    let k = C::new(coupling, 0.0);
    let mut triplets = Vec::with_capacity(2 * pairs.len());
    for (r, c) in pairs {
        if r == c {
            let d = t.get(r, r);
            triplets.push((r, r, C::new(coupling * (2.0 - 2.0 * d.re), 0.0)));
        } else {
            let h = -k * (t.get(r, c) + t.get(c, r).conj());
            triplets.push((r, c, h));
            triplets.push((c, r, h.conj()));
        }
    }
    let matrix = SparseOperator::from_triplets(Arc::clone(t.basis()), triplets)?;
    Ok(Hamiltonian {
        coupling,
        matrix,
        eigen: OnceLock::new(),
    })
}

impl Hamiltonian {
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn basis(&self) -> &Arc<BasisEnumeration> {
        self.matrix.basis()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn eigen(&self) -> &Eigen {
        self.eigen.get_or_init(|| {
            let dense = self.matrix.to_dense();
            let eig = SymmetricEigen::new(dense);
            Eigen {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            }
        })
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eigen().values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvolutionMethod {
    /// Full diagonalization; the reference method.
    DenseEigen,
    /// Lanczos projection with adaptive time stepping.
    Krylov {
        #[serde(default = "default_subspace")]
        subspace: usize,
        #[serde(default = "default_max_substeps")]
        max_substeps: usize,
    },
    /// Truncated Taylor series on `ceil(‖H‖₁·t / step_bound)` equal steps.
    ScaledTaylor {
        #[serde(default = "default_step_bound")]
        step_bound: f64,
    },
}

fn default_subspace() -> usize {
    30
}

fn default_max_substeps() -> usize {
    100_000
}

fn default_step_bound() -> f64 {
    1.0
}

impl EvolutionMethod {
    pub fn krylov() -> Self {
        EvolutionMethod::Krylov {
            subspace: default_subspace(),
            max_substeps: default_max_substeps(),
        }
    }

    pub fn scaled_taylor() -> Self {
        EvolutionMethod::ScaledTaylor {
            step_bound: default_step_bound(),
        }
    }

    /// Dense up to [`DENSE_LIMIT`], Krylov beyond.
    pub fn auto(dim: usize) -> Self {
        if dim <= DENSE_LIMIT {
            EvolutionMethod::DenseEigen
        } else {
            Self::krylov()
        }
    }

    /// Accepts `dense_eigen`, `krylov`, `scaled_taylor` or `auto`.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "dense_eigen" => Ok(EvolutionMethod::DenseEigen),
            "krylov" => Ok(Self::krylov()),
            "scaled_taylor" => Ok(Self::scaled_taylor()),
            "auto" => Ok(Self::auto(dim)),
            other => Err(Error::Method(format!("unknown method {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EvolutionMethod::DenseEigen => "dense_eigen",
            EvolutionMethod::Krylov { .. } => "krylov",
            EvolutionMethod::ScaledTaylor { .. } => "scaled_taylor",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EvolutionMethod::DenseEigen => Ok(()),
            EvolutionMethod::Krylov {
                subspace,
                max_substeps,
            } => {
                if subspace == 0 || max_substeps == 0 {
                    Err(Error::Method("krylov parameters must be positive".into()))
                } else {
                    Ok(())
                }
            }
            EvolutionMethod::ScaledTaylor { step_bound } => {
                if step_bound.is_finite() && step_bound > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Method("taylor step bound must be positive".into()))
                }
            }
        }
    }
}

impl fmt::Display for EvolutionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvolutionMethod::DenseEigen => f.write_str("dense_eigen"),
            EvolutionMethod::Krylov {
                subspace,
                max_substeps,
            } => write!(
                f,
                "krylov(subspace={subspace}, max_substeps={max_substeps})"
            ),
            EvolutionMethod::ScaledTaylor { step_bound } => {
                write!(f, "scaled_taylor(step_bound={step_bound})")
            }
        }
    }
}

fn norm(v: &[C]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_normalized(state: &QuantumState) -> Result<()> {
    let n = state.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

fn dense_evolve(h: &Hamiltonian, v: &[C], t: f64) -> Vec<C> {
    let eig = h.eigen();
    let psi = DVector::from_column_slice(v);
    let mut coeffs = eig.vectors.adjoint() * psi;
    for (c, &lambda) in coeffs.iter_mut().zip(eig.values.iter()) {
        *c *= (-I * lambda * t).exp();
    }
    (&eig.vectors * coeffs).iter().copied().collect()
}

/// One Lanczos projection of `exp(-iHτ)v`; returns the result and the
/// standard a-posteriori error estimate `β0·β_m·|e_mᵀ exp(-iτT_m) e1|`.
fn lanczos_step(h: &SparseOperator, v: &[C], tau: f64, m: usize, scale: f64) -> (Vec<C>, f64) {
    let beta0 = norm(v);
    if beta0 == 0.0 {
        return (v.to_vec(), 0.0);
    }
    let mut basis: Vec<Vec<C>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut breakdown = false;
    for j in 0..m.min(v.len()) {
        let mut w = h.matvec(&basis[j]);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        // Two passes of full reorthogonalization.
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= proj * qi;
                }
            }
        }
        let beta = norm(&w);
        if beta <= 1e-13 * scale.max(1.0) {
            breakdown = true;
            break;
        }
        betas.push(beta);
        basis.push(w.into_iter().map(|x| x / beta).collect());
    }
    let mm = alphas.len();
    let mut tm = DMatrix::<f64>::zeros(mm, mm);
    for i in 0..mm {
        tm[(i, i)] = alphas[i];
        if i + 1 < mm {
            tm[(i, i + 1)] = betas[i];
            tm[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(tm);
    let y: Vec<C> = (0..mm)
        .map(|row| {
            (0..mm)
                .map(|col| {
                    let q = eig.eigenvectors[(row, col)];
                    let q0 = eig.eigenvectors[(0, col)];
                    C::new(q * q0, 0.0) * (-I * eig.eigenvalues[col] * tau).exp()
                })
                .sum()
        })
        .collect();
    let estimate = if breakdown || betas.len() < mm {
        0.0
    } else {
        beta0 * betas[mm - 1] * y[mm - 1].norm()
    };
    let mut out = vec![C::default(); v.len()];
    for (yi, q) in y.iter().zip(&basis) {
        for (o, qi) in out.iter_mut().zip(q) {
            *o += beta0 * yi * qi;
        }
    }
    (out, estimate)
}

fn krylov_evolve(
    h: &SparseOperator,
    v: &[C],
    t: f64,
    tol: f64,
    subspace: usize,
    max_substeps: usize,
) -> Result<Vec<C>> {
    let scale = h.norm_one();
    let total = t.abs();
    let sign = t.signum();
    let mut v = v.to_vec();
    let mut done = 0.0;
    let mut tau = total;
    let mut attempts = 0;
    while done < total {
        tau = tau.min(total - done);
        attempts += 1;
        let (next, estimate) = lanczos_step(h, &v, sign * tau, subspace, scale);
        if estimate <= tol * tau / total {
            v = next;
            done += tau;
        } else {
            tau /= 2.0;
        }
        if attempts >= max_substeps && done < total {
            return Err(Error::KrylovConvergence {
                substeps: attempts,
                estimate,
            });
        }
    }
    Ok(v)
}

/// Smallest degree whose Lagrange remainder bound at `theta` is below the
/// double-precision unit roundoff.
fn taylor_degree(theta: f64) -> usize {
    let mut term = theta;
    let mut d = 1;
    while term > f64::EPSILON / 2.0 && d < 200 {
        d += 1;
        term *= theta / d as f64;
    }
    d
}

fn taylor_evolve(h: &SparseOperator, v: &[C], t: f64, step_bound: f64) -> Vec<C> {
    let norm1 = h.norm_one();
    let steps = ((norm1 * t.abs()) / step_bound).ceil().max(1.0) as usize;
    let tau = t / steps as f64;
    let degree = taylor_degree(norm1 * tau.abs());
    let mut v = v.to_vec();
    for _ in 0..steps {
        let mut term = v.clone();
        let mut acc = v.clone();
        for d in 1..=degree {
            let factor = -I * tau / d as f64;
            term = h.matvec(&term).into_iter().map(|x| x * factor).collect();
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += x;
            }
        }
        v = acc;
    }
    v
}

fn evolve_vector(
    h: &Hamiltonian,
    v: &[C],
    t: f64,
    method: EvolutionMethod,
    tol: f64,
) -> Result<Vec<C>> {
    if !t.is_finite() {
        return Err(Error::Times);
    }
    if t == 0.0 {
        return Ok(v.to_vec());
    }
    match method {
        EvolutionMethod::DenseEigen => Ok(dense_evolve(h, v, t)),
        EvolutionMethod::Krylov {
            subspace,
            max_substeps,
        } => krylov_evolve(&h.matrix, v, t, tol, subspace, max_substeps),
        EvolutionMethod::ScaledTaylor { step_bound } => {
            Ok(taylor_evolve(&h.matrix, v, t, step_bound))
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Method(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

/// `e^{-iHt}|ψ⟩` (ħ = 1).
pub fn evolve(
    h: &Hamiltonian,
    state: &QuantumState,
    t: f64,
    method: EvolutionMethod,
    tol: f64,
) -> Result<QuantumState> {
    method.validate()?;
    check_tol(tol)?;
    check_normalized(state)?;
    let v = h.basis().to_vector(state)?;
    Ok(h.basis().to_state(&evolve_vector(h, &v, t, method, tol)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<QuantumState>,
    pub method: EvolutionMethod,
    pub tol: f64,
    /// `|‖ψ(t)‖ - 1|` per output time.
    pub norm_drift: Vec<f64>,
}

/// Evolves to every time in `times` independently from `state`; times are
/// processed in parallel with results identical to a serial loop.
pub fn evolve_series(
    h: &Hamiltonian,
    state: &QuantumState,
    times: &[f64],
    method: EvolutionMethod,
    tol: f64,
) -> Result<EvolutionResult> {
    method.validate()?;
    check_tol(tol)?;
    check_normalized(state)?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Times);
    }
    let v = h.basis().to_vector(state)?;
    if method == EvolutionMethod::DenseEigen {
        h.eigen();
    }
    let states = times
        .par_iter()
        .map(|&t| evolve_vector(h, &v, t, method, tol).map(|w| h.basis().to_state(&w)))
        .collect::<Result<Vec<_>>>()?;
    let norm_drift = states.iter().map(|s| (s.norm() - 1.0).abs()).collect();
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        method,
        tol,
        norm_drift,
    })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl EvolutionResult {
    /// Columns `time,configuration,re,im`, one row per stored amplitude.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time,configuration,re,im")?;
        for (t, state) in self.times.iter().zip(&self.states) {
            for (cfg, a) in state.iter() {
                writeln!(w, "{},{},{},{}", num(*t), cfg, num(a.re), num(a.im))?;
            }
        }
        Ok(())
    }

    /// Columns `time,selector,value,probability`.
    pub fn write_marginals_csv<W: Write>(
        &self,
        mut w: W,
        selectors: &[MarginalSelector],
    ) -> Result<()> {
        writeln!(w, "time,selector,value,probability")?;
        for (t, state) in self.times.iter().zip(&self.states) {
            for sel in selectors {
                for (value, p) in state.marginal(*sel) {
                    writeln!(w, "{},{},{},{}", num(*t), sel.name(), value, num(p))?;
                }
            }
        }
        Ok(())
    }
}

/// One application of a (not necessarily unitary) linear step.
pub trait LinearStep {
    fn step(&self, state: &QuantumState) -> Result<QuantumState>;
}

impl LinearStep for StepOperator {
    fn step(&self, state: &QuantumState) -> Result<QuantumState> {
        self.apply(state)
    }
}

impl LinearStep for SparseOperator {
    fn step(&self, state: &QuantumState) -> Result<QuantumState> {
        self.apply(state)
    }
}

/// `[ψ, Tψ, …, Tⁿψ]`, unnormalized.
pub fn iterate_step<T: LinearStep + ?Sized>(
    op: &T,
    state: &QuantumState,
    n: usize,
) -> Result<Vec<QuantumState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(state.clone());
    for i in 0..n {
        let next = op.step(&out[i])?;
        out.push(next);
    }
    Ok(out)
}

/// `⟨ψ|H|ψ⟩`, which is real for self-adjoint `H`.
pub fn expectation(h: &Hamiltonian, state: &QuantumState) -> Result<f64> {
    check_normalized(state)?;
    let v = h.basis().to_vector(state)?;
    let hv = h.matrix.matvec(&v);
    let value = dot(&v, &hv);
    debug_assert!(value.im.abs() <= 1e-12 * (1.0 + value.re.abs()));
    Ok(value.re)
}
