//! Graph Laplacians, their spectra, resolvents and heat semigroups, plus
//! convergence diagnostics for sequences of graphs.

mod diagnostics;
mod heat;
mod iterative;

pub use diagnostics::{
    eigen_convergence, mosco_diagnostic, quadratic_form_check, wlsti_fit, EigenTable, MoscoReport, MoscoRow,
    MoscoStage, WlstiEstimate,
};
pub use heat::{heat_measure, heat_semigroup, resolvent, resolvent_objective, HeatMode, ResolventSolver};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropyflow::GraphDirichlet;
use crate::error::{invalid, Error, Result};

/// Largest size handled by the dense symmetric eigensolver.
pub const DENSE_CAP: usize = 2000;

/// Residual tolerance for eigenpairs, relative to the operator norm bound.
pub const EIGEN_TOL: f64 = 1e-8;

/// `(Lf)_i = (1/m_i) Σ_j w_ij (f_i − f_j)`, self-adjoint in `ℓ²(m)` with `⟨Lf, f⟩_m = 2E(f)`.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    graph: GraphDirichlet,
    /// Adjacency lists `(j, w_ij)`.
    adj: Vec<Vec<(usize, f64)>>,
}

impl LaplaceOperator {
    pub fn new(graph: &GraphDirichlet) -> Result<Self> {
        if let Some(i) = graph.node_mass().iter().position(|&m| !(m > 0.0)) {
            return invalid(format!("node {i} has zero mass"));
        }
        let mut adj = vec![Vec::new(); graph.n()];
        for &(i, j, w) in graph.edges() {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        Ok(Self { graph: graph.clone(), adj })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &GraphDirichlet {
        &self.graph
    }

    pub fn mass(&self) -> &[f64] {
        self.graph.node_mass()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let m = self.mass();
        (0..self.n())
            .map(|i| self.adj[i].iter().map(|&(j, w)| w * (f[i] - f[j])).sum::<f64>() / m[i])
            .collect()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mass().iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    pub fn energy(&self, f: &[f64]) -> f64 {
        self.graph.energy(f)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let m = self.mass();
        (0..self.n())
            .map(|i| 2.0 * self.adj[i].iter().map(|&(_, w)| w).sum::<f64>() / m[i])
            .fold(0.0, f64::max)
    }

    /// `x ↦ M^{−1/2} (D − W) M^{−1/2} x`, the symmetric form of `L`.
    pub(crate) fn apply_sym(&self, x: &[f64]) -> Vec<f64> {
        let s: Vec<f64> = self.mass().iter().map(|m| m.sqrt()).collect();
        (0..self.n())
            .map(|i| {
                let xi = x[i] / s[i];
                self.adj[i].iter().map(|&(j, w)| w * (xi - x[j] / s[j])).sum::<f64>() / s[i]
            })
            .collect()
    }

    pub(crate) fn dense_sym(&self) -> DMatrix<f64> {
        let n = self.n();
        let s: Vec<f64> = self.mass().iter().map(|m| m.sqrt()).collect();
        let mut a = DMatrix::zeros(n, n);
        for &(i, j, w) in self.graph.edges() {
            a[(i, j)] -= w / (s[i] * s[j]);
            a[(j, i)] -= w / (s[i] * s[j]);
            a[(i, i)] += w / (s[i] * s[i]);
            a[(j, j)] += w / (s[j] * s[j]);
        }
        a
    }
}

/// Lowest eigenpairs of a Laplacian, eigenvectors orthonormal in `ℓ²(m)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖Lv − λv‖_m` per pair.
    pub residuals: Vec<f64>,
    /// Number of connected components, i.e. the multiplicity of the zero eigenvalue.
    pub components: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Zero is a multiple eigenvalue, so the graph is disconnected.
    pub fn degenerate_kernel(&self) -> bool {
        self.components > 1
    }

    /// `Σ e^{−λ_j t} ⟨f, v_j⟩_m v_j`; exact only when the basis is complete.
    pub fn heat(&self, mass: &[f64], f: &[f64], t: f64) -> Vec<f64> {
        let n = f.len();
        let mut out = vec![0.0; n];
        for (lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let c: f64 = (0..n).map(|i| mass[i] * f[i] * v[i]).sum::<f64>() * (-lam * t).exp();
            for i in 0..n {
                out[i] += c * v[i];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense up to [`DENSE_CAP`] nodes, iterative above.
    Auto,
    Dense,
    Iterative,
}

/// The `k` smallest eigenpairs of `op`.
pub fn spectrum(op: &LaplaceOperator, k: usize) -> Result<Spectrum> {
    spectrum_with(op, k, EigenMethod::Auto)
}

pub fn spectrum_with(op: &LaplaceOperator, k: usize, method: EigenMethod) -> Result<Spectrum> {
    let n = op.n();
    if k > n {
        return invalid(format!("requested {k} eigenpairs of a {n}-node operator"));
    }
    let dense = match method {
        EigenMethod::Auto => n <= DENSE_CAP,
        EigenMethod::Dense => true,
        EigenMethod::Iterative => false,
    };
    let (vals, sym_vecs) = if dense {
        let eig = SymmetricEigen::new(op.dense_sym());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals: Vec<f64> = order[..k].iter().map(|&c| eig.eigenvalues[c]).collect();
        let vecs: Vec<Vec<f64>> = order[..k].iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect();
        (vals, vecs)
    } else {
        iterative::smallest(op, k)?
    };
    let s: Vec<f64> = op.mass().iter().map(|m| m.sqrt()).collect();
    let scale = op.norm_bound().max(1.0);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (lam, u) in vals.into_iter().zip(sym_vecs) {
        let v: Vec<f64> = u.iter().zip(&s).map(|(a, b)| a / b).collect();
        // deterministic sign: first significant entry positive
        let pivot = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        let v: Vec<f64> = if pivot < 0.0 { v.into_iter().map(|x| -x).collect() } else { v };
        let lv = op.apply(&v);
        let r: Vec<f64> = lv.iter().zip(&v).map(|(a, b)| a - lam * b).collect();
        let res = op.norm(&r);
        if !(res <= EIGEN_TOL * scale) {
            return Err(Error::NoConvergence { solver: "eigensolver", residual: res });
        }
        eigenvalues.push(lam);
        residuals.push(res);
        eigenvectors.push(v);
    }
    Ok(Spectrum { eigenvalues, eigenvectors, residuals, components: op.graph().components().len() })
}

/// Largest deviation from the min-max characterization over the returned
/// nested spans `V_j = span(v_1..v_j)`: `2E(f) ≤ λ_j` for unit `f ∈ V_j`
/// (checked on `samples` random unit vectors each) and `2E(v_j) = λ_j`.
pub fn minmax_check(op: &LaplaceOperator, spec: &Spectrum, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.n();
    let mut worst: f64 = 0.0;
    for j in 0..spec.len() {
        let lam = spec.eigenvalues[j];
        worst = worst.max((2.0 * op.energy(&spec.eigenvectors[j]) - lam).abs());
        for _ in 0..samples {
            let c: Vec<f64> = (0..=j).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let f: Vec<f64> =
                (0..n).map(|i| (0..=j).map(|l| c[l] * spec.eigenvectors[l][i]).sum::<f64>() / norm).collect();
            worst = worst.max(2.0 * op.energy(&f) - lam);
        }
    }
    worst
}

/// `(m-weighted) Gram matrix − identity`, max entry.
pub fn orthonormality_defect(op: &LaplaceOperator, spec: &Spectrum) -> f64 {
    let k = spec.len();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in a..k {
            let g = op.inner(&spec.eigenvectors[a], &spec.eigenvectors[b]);
            worst = worst.max((g - if a == b { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

pub(crate) fn dvec(f: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(f)
}
