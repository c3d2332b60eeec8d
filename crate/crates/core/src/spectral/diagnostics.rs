//! Quadratic-form certificate, wLSTI constants, Mosco and spectral convergence diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{minmax_check, orthonormality_defect, resolvent, spectrum, LaplaceOperator, Spectrum};
use crate::entropyflow::GraphDirichlet;
use crate::error::{invalid, Error, Result};
use crate::gromov::glue_by_coupling;
use crate::space::FinitePmmSpace;
use crate::transport::Coupling;

/// Largest `|E(f+g) + E(f−g) − 2E(f) − 2E(g)|` over random pairs with entries in `[−1, 1]`.
///
/// Zero up to round-off for any graph form; this is the discrete counterpart of
/// the Cheeger energy being quadratic.
pub fn quadratic_form_check(graph: &GraphDirichlet, trials: usize, seed: u64) -> f64 {
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let diff: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
        let r = graph.energy(&sum) + graph.energy(&diff) - 2.0 * graph.energy(&f) - 2.0 * graph.energy(&g);
        worst = worst.max(r.abs());
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlstiEstimate {
    /// Lower estimate of the smallest admissible `B` for the given `A`.
    pub b: f64,
    /// `max_components (Σ d² m / Σ m)^{1/2}`: the inequality on energy-free
    /// functions needs `A` at least this large.
    pub constant_ratio: f64,
    pub infeasible_on_constants: bool,
    /// Number of test functions with positive energy.
    pub tested: usize,
}

/// Lower estimate of the best `B` in `(Σ d²(·,x̄) f² m)^{1/2} ≤ A‖f‖_m + B √E(f)`
/// over eigenvectors, `random` resolvent-smoothed random vectors and point spikes.
pub fn wlsti_fit(space: &FinitePmmSpace, graph: &GraphDirichlet, a: f64, random: usize, seed: u64) -> Result<WlstiEstimate> {
    if !(a >= 0.0) {
        return invalid("A must be nonnegative");
    }
    if graph.n() != space.n() {
        return Err(Error::Dimension { expected: space.n(), got: graph.n() });
    }
    let n = space.n();
    let m = graph.node_mass();
    let d2: Vec<f64> = space.base_distances().iter().map(|d| d * d).collect();
    let mut constant_ratio: f64 = 0.0;
    for comp in graph.components() {
        let num: f64 = comp.iter().map(|&i| d2[i] * m[i]).sum();
        let den: f64 = comp.iter().map(|&i| m[i]).sum();
        constant_ratio = constant_ratio.max((num / den).sqrt());
    }
    let mut family: Vec<Vec<f64>> = Vec::new();
    for i in (0..n).step_by(n.div_ceil(200).max(1)) {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        family.push(e);
    }
    if let Ok(op) = LaplaceOperator::new(graph) {
        if let Ok(spec) = spectrum(&op, n.min(64)) {
            family.extend(spec.eigenvectors);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = op.norm_bound();
        for _ in 0..if scale > 0.0 { random } else { 0 } {
            let f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let tau = 10f64.powf(rng.random::<f64>() * 4.0) / scale;
            family.push(resolvent(&op, &f, tau)?);
        }
    }
    let mut b: f64 = 0.0;
    let mut tested = 0;
    for f in &family {
        let e = graph.energy(f);
        let norm2: f64 = (0..n).map(|i| m[i] * f[i] * f[i]).sum();
        if !(e > 1e-14 * norm2 * graph_scale(graph)) {
            continue;
        }
        tested += 1;
        let lhs: f64 = (0..n).map(|i| d2[i] * f[i] * f[i] * m[i]).sum::<f64>().sqrt();
        b = b.max((lhs - a * norm2.sqrt()).max(0.0) / e.sqrt());
    }
    Ok(WlstiEstimate {
        b,
        constant_ratio,
        infeasible_on_constants: constant_ratio > a * (1.0 + 1e-12),
        tested,
    })
}

fn graph_scale(graph: &GraphDirichlet) -> f64 {
    let m = graph.node_mass();
    graph
        .edges()
        .iter()
        .map(|&(i, j, w)| w / m[i].min(m[j]).max(f64::MIN_POSITIVE))
        .fold(1.0, f64::max)
}

/// One approximating space with its graph and a coupling of the normalized
/// limit measure (rows) with its normalized measure (columns).
pub struct MoscoStage<'a> {
    pub space: &'a FinitePmmSpace,
    pub graph: &'a GraphDirichlet,
    pub coupling: &'a Coupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoRow {
    pub nodes: usize,
    /// `|E_n(f_n) − E_∞(f_∞)|` for the recovery `f_n`.
    pub energy_gap: f64,
    /// `|‖f_n‖ − ‖f_∞‖|`.
    pub norm_gap: f64,
    /// Largest test-integral gap `|∫φ f_n m_n − ∫φ f_∞ m_∞|` over tent functions in the glued space.
    pub test_gap: f64,
    /// Smallest energy over the perturbed family (smoothed, mixed with the mean, spiked).
    pub liminf_min: f64,
    /// The perturbed family went below `E_∞(f_∞) − tol`.
    pub liminf_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoscoReport {
    pub limit_energy: f64,
    pub rows: Vec<MoscoRow>,
}

/// Conditional expectation of `f` along `coupling`: `f_n(y) = Σ_x γ(x,y) f(x) / ν(y)`.
pub fn transport_function(f: &[f64], coupling: &Coupling) -> Vec<f64> {
    let (r, c) = coupling.plan.shape();
    (0..c)
        .map(|j| {
            let col: f64 = (0..r).map(|i| coupling.plan[(i, j)]).sum();
            if col > 0.0 {
                (0..r).map(|i| coupling.plan[(i, j)] * f[i]).sum::<f64>() / col
            } else {
                0.0
            }
        })
        .collect()
}

/// Recovery-sequence and liminf diagnostics for `f_∞` along a sequence of graphs.
///
/// The liminf side can only probe a finite family of weakly converging
/// perturbations; a clean report is evidence, not proof.
pub fn mosco_diagnostic(
    limit: &FinitePmmSpace,
    limit_graph: &GraphDirichlet,
    f_inf: &[f64],
    stages: &[MoscoStage],
    tol: f64,
) -> Result<MoscoReport> {
    if f_inf.len() != limit.n() || limit_graph.n() != limit.n() {
        return Err(Error::Dimension { expected: limit.n(), got: f_inf.len() });
    }
    let limit_energy = limit_graph.energy(f_inf);
    let m_inf = limit.mass();
    let norm_inf = (0..limit.n()).map(|i| m_inf[i] * f_inf[i] * f_inf[i]).sum::<f64>().sqrt();
    let radius = 0.25 * limit.diameter().max(f64::MIN_POSITIVE);
    let centers: Vec<usize> = (0..limit.n()).step_by(limit.n().div_ceil(100)).collect();
    let rows = stages
        .par_iter()
        .map(|st| -> Result<MoscoRow> {
            let (r, c) = st.coupling.plan.shape();
            if r != limit.n() || c != st.space.n() || st.graph.n() != c {
                return invalid("coupling does not embed the stage into the limit");
            }
            let f = transport_function(f_inf, st.coupling);
            let m = st.space.mass();
            let norm = (0..c).map(|j| m[j] * f[j] * f[j]).sum::<f64>().sqrt();
            let glued = glue_by_coupling(limit, st.space, st.coupling);
            let mut test_gap: f64 = 0.0;
            for &z in &centers {
                let tent = |d: f64| (1.0 - d / radius).max(0.0);
                let a: f64 = (0..limit.n()).map(|x| tent(limit.d(x, z)) * f_inf[x] * m_inf[x]).sum();
                let b: f64 = (0..c).map(|y| tent(glued.cross[(z, y)]) * f[y] * m[y]).sum();
                test_gap = test_gap.max((a - b).abs());
            }
            let e = st.graph.energy(&f);
            let mut liminf_min = e;
            if let Ok(op) = LaplaceOperator::new(st.graph) {
                let smooth = resolvent(&op, &f, 1.0 / op.norm_bound().max(f64::MIN_POSITIVE))?;
                liminf_min = liminf_min.min(st.graph.energy(&smooth));
            }
            let total: f64 = m.iter().sum();
            let mean = (0..c).map(|j| m[j] * f[j]).sum::<f64>() / total;
            let s = 1.0 / c as f64;
            let mixed: Vec<f64> = f.iter().map(|x| (1.0 - s) * x + s * mean).collect();
            liminf_min = liminf_min.min(st.graph.energy(&mixed));
            if let Some(y) = (0..c).min_by(|&a, &b| m[a].total_cmp(&m[b])) {
                let mut spiked = f.clone();
                spiked[y] += 1.0;
                liminf_min = liminf_min.min(st.graph.energy(&spiked));
            }
            Ok(MoscoRow {
                nodes: c,
                energy_gap: (e - limit_energy).abs(),
                norm_gap: (norm - norm_inf).abs(),
                test_gap,
                liminf_min,
                liminf_flag: liminf_min < limit_energy - tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MoscoReport { limit_energy, rows })
}

/// `k × len` table of the lowest eigenvalues along a sequence of graphs.
#[derive(Debug, Clone)]
pub struct EigenTable {
    /// `columns[c][j] = λ_j` of graph `c`.
    pub columns: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub orthonormality: Vec<f64>,
    pub minmax: Vec<f64>,
    /// Zero eigenvalue is multiple (disconnected graph).
    pub degenerate_kernel: Vec<bool>,
}

impl EigenTable {
    pub fn row(&self, j: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[j]).collect()
    }
}

pub fn eigen_convergence(graphs: &[GraphDirichlet], k: usize) -> Result<EigenTable> {
    let cols: Vec<(Spectrum, f64, f64)> = graphs
        .par_iter()
        .map(|g| {
            let op = LaplaceOperator::new(g)?;
            let s = spectrum(&op, k)?;
            let mm = minmax_check(&op, &s, 10, 0);
            let orth = orthonormality_defect(&op, &s);
            Ok((s, mm, orth))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenTable {
        columns: cols.iter().map(|(s, _, _)| s.eigenvalues.clone()).collect(),
        residuals: cols.iter().map(|(s, _, _)| s.residuals.iter().copied().fold(0.0, f64::max)).collect(),
        orthonormality: cols.iter().map(|(_, _, o)| *o).collect(),
        minmax: cols.iter().map(|(_, m, _)| *m).collect(),
        degenerate_kernel: cols.iter().map(|(s, _, _)| s.degenerate_kernel()).collect(),
    })
}
