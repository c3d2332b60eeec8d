//! Entropic minimizing movement for the relative entropy.
//!
//! One step minimizes, over couplings `γ` with first marginal `μ`,
//!
//! ```text
//! F(γ) = Σ γ_ij c̃_ij + α Σ γ_ij log(γ_ij / (μ_i m_j)) + (1 − α) Ent_m(ν),   ν = γᵀ1,
//! c̃_ij = d_ij² / (2τ_c) − α (u_i + u_j),   τ_c = τ / (1 − α/2).
//! ```
//!
//! The KL term contributes diffusion at rate `α/2` of the heat flow; the
//! inflated `τ_c` compensates so that the combined step advances time `τ`.
//! The potential `u` solves `Σ_j m_j exp(u_i + u_j − d_ij²/(2τ_c α)) = 1`, which
//! makes `m` itself (normalized) an exact fixed point on every space.
//!
//! The optimality system is `γ_ij = a_i K_ij b_j` with `K = exp(−c̃/α)`,
//! `a = μ / (K b)`, `b = m · (Kᵀ a)^{−(1−α)}`, solved by fixed-point iteration
//! in the log domain. Reported `W₂` increments use exact transport.

use nalgebra::DMatrix;

use super::{entropy, fisher, GraphDirichlet, DENSITY_FLOOR};
use crate::error::{invalid, Error, Result};
use crate::space::FinitePmmSpace;
use crate::transport::w2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkoParams {
    /// Share of the entropy carried by the coupling KL term, in `(0, 1]`.
    pub alpha: f64,
    pub max_iter: usize,
    /// Required KKT residual in log-scaling units.
    pub tol: f64,
}

impl Default for JkoParams {
    fn default() -> Self {
        Self { alpha: 0.5, max_iter: 20_000, tol: 1e-8 }
    }
}

/// Result of a single step.
#[derive(Debug, Clone)]
pub struct JkoStep {
    pub nu: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Objective at the minimizer and at the identity coupling of `μ`.
    pub objective: f64,
    pub objective_at_start: f64,
}

/// Kernel data shared by all steps of a flow on one space with one `τ`.
struct Kernel {
    /// `log K_ij`, `−∞` off the support.
    log_k: DMatrix<f64>,
    cost: DMatrix<f64>,
    log_m: Vec<f64>,
    alpha: f64,
}

fn lse(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|x| (x - mx).exp()).sum::<f64>().ln()
}

fn log_or_neg_inf(x: f64) -> f64 {
    if x > DENSITY_FLOOR {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

impl Kernel {
    fn new(space: &FinitePmmSpace, tau: f64, p: &JkoParams) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid("tau must be positive");
        }
        if !(p.alpha > 0.0 && p.alpha <= 1.0) {
            return invalid("alpha must lie in (0, 1]");
        }
        let n = space.n();
        let total = space.total_mass();
        let log_m: Vec<f64> = space.mass().iter().map(|&x| log_or_neg_inf(x / total)).collect();
        let tau_c = tau / (1.0 - p.alpha / 2.0);
        let quad = DMatrix::from_fn(n, n, |i, j| space.d(i, j).powi(2) / (2.0 * tau_c));
        let g = quad.map(|c| -c / p.alpha);
        // symmetric scaling: u_i = −log Σ_j exp(g_ij + u_j + log m_j), averaged iteration
        let mut u = vec![0.0; n];
        let mut converged = false;
        for _ in 0..p.max_iter {
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    if log_m[i] == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    -lse((0..n).map(|j| g[(i, j)] + u[j] + log_m[j]))
                })
                .collect();
            let mut change: f64 = 0.0;
            for i in 0..n {
                let v = 0.5 * (u[i] + next[i]);
                change = change.max((v - u[i]).abs());
                u[i] = v;
            }
            if change < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { solver: "jko stationary scaling", residual: f64::NAN });
        }
        let cost = DMatrix::from_fn(n, n, |i, j| quad[(i, j)] - p.alpha * (u[i] + u[j]));
        let log_k = DMatrix::from_fn(n, n, |i, j| {
            if log_m[i] == f64::NEG_INFINITY || log_m[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                -cost[(i, j)] / p.alpha
            }
        });
        Ok(Self { log_k, cost, log_m, alpha: p.alpha })
    }

    fn objective(&self, mu: &[f64], plan: &DMatrix<f64>) -> f64 {
        let n = mu.len();
        let mut f = 0.0;
        let mut nu = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let g = plan[(i, j)];
                if g > DENSITY_FLOOR {
                    f += g * self.cost[(i, j)] + self.alpha * g * (g.ln() - mu[i].ln() - self.log_m[j]);
                    nu[j] += g;
                }
            }
        }
        let ent: f64 = nu
            .iter()
            .zip(&self.log_m)
            .filter(|(v, _)| **v > DENSITY_FLOOR)
            .map(|(v, lm)| v * (v.ln() - lm))
            .sum();
        f + (1.0 - self.alpha) * ent
    }

    fn step(&self, mu: &[f64], p: &JkoParams) -> Result<JkoStep> {
        let n = mu.len();
        let log_mu: Vec<f64> = mu.iter().map(|&x| log_or_neg_inf(x)).collect();
        let mut log_b = self.log_m.clone();
        let mut log_a = vec![0.0; n];
        let mut log_q = vec![0.0; n];
        let beta = 1.0 - self.alpha;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < p.max_iter {
            iterations += 1;
            for i in 0..n {
                log_a[i] = if log_mu[i] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    log_mu[i] - lse((0..n).map(|j| self.log_k[(i, j)] + log_b[j]))
                };
            }
            residual = 0.0;
            for j in 0..n {
                log_q[j] = lse((0..n).map(|i| log_a[i] + self.log_k[(i, j)]));
                let target = self.log_m[j] - beta * log_q[j];
                if target.is_finite() {
                    residual = f64::max(residual, (target - log_b[j]).abs());
                }
                log_b[j] = if target.is_finite() { target } else { f64::NEG_INFINITY };
            }
            // the update contracts with factor β, so β·change bounds the distance to the fixed point
            if residual * beta <= p.tol * 1e-2 || beta == 0.0 {
                break;
            }
        }
        // final a for the last b; residual is the remaining KKT defect
        for i in 0..n {
            log_a[i] = if log_mu[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                log_mu[i] - lse((0..n).map(|j| self.log_k[(i, j)] + log_b[j]))
            };
        }
        let mut kkt: f64 = 0.0;
        for j in 0..n {
            log_q[j] = lse((0..n).map(|i| log_a[i] + self.log_k[(i, j)]));
            let target = self.log_m[j] - beta * log_q[j];
            if target.is_finite() {
                kkt = kkt.max((target - log_b[j]).abs());
            }
        }
        if !(kkt <= p.tol) {
            return Err(Error::NoConvergence { solver: "jko step", residual: kkt.max(residual) });
        }
        let plan = DMatrix::from_fn(n, n, |i, j| (log_a[i] + self.log_k[(i, j)] + log_b[j]).exp());
        let mut nu: Vec<f64> = (0..n).map(|j| (0..n).map(|i| plan[(i, j)]).sum()).collect();
        let s: f64 = nu.iter().sum();
        nu.iter_mut().for_each(|x| *x /= s);
        let identity = DMatrix::from_fn(n, n, |i, j| if i == j { mu[i] } else { 0.0 });
        Ok(JkoStep {
            nu,
            kkt_residual: kkt,
            iterations,
            objective: self.objective(mu, &plan),
            objective_at_start: self.objective(mu, &identity),
        })
    }
}

fn check_start(mu: &[f64], space: &FinitePmmSpace) -> Result<()> {
    if mu.len() != space.n() {
        return Err(Error::Dimension { expected: space.n(), got: mu.len() });
    }
    if mu.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return invalid("measure entries must be finite and nonnegative");
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return invalid(format!("measure has total mass {s}, expected 1"));
    }
    if !entropy(mu, space).is_finite() {
        return invalid("starting measure must have finite entropy");
    }
    Ok(())
}

/// One minimizing-movement step of size `tau`.
pub fn jko_step(mu: &[f64], tau: f64, space: &FinitePmmSpace, params: &JkoParams) -> Result<JkoStep> {
    check_start(mu, space)?;
    Kernel::new(space, tau, params)?.step(mu, params)
}

/// A discrete flow with per-step bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub tau: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `W₂(states[k], states[k+1])`, exact transport.
    pub step_w2: Vec<f64>,
    pub entropies: Vec<f64>,
    /// Fisher information of each state.
    pub fisher: Vec<f64>,
    /// KKT residual of each step.
    pub residuals: Vec<f64>,
}

pub const TRACE_CSV_HEADER: &str = "time,entropy,speed,fisher,residual";

impl FlowTrace {
    /// A trace sampled from an externally computed curve on a uniform grid.
    pub fn from_states(
        tau: f64,
        states: Vec<Vec<f64>>,
        space: &FinitePmmSpace,
        graph: &GraphDirichlet,
    ) -> Result<Self> {
        if states.is_empty() {
            return invalid("trace needs at least one state");
        }
        let mut step_w2 = Vec::with_capacity(states.len() - 1);
        for w in states.windows(2) {
            step_w2.push(w2(space, &w[0], &w[1])?);
        }
        Ok(Self {
            tau,
            times: (0..states.len()).map(|k| k as f64 * tau).collect(),
            entropies: states.iter().map(|s| entropy(s, space)).collect(),
            fisher: states.iter().map(|s| fisher(s, graph)).collect(),
            residuals: vec![0.0; states.len() - 1],
            step_w2,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Index of the state at time `t`, if `t` is on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.tau).round();
        if k < 0.0 || (k * self.tau - t).abs() > 1e-9 * self.tau.max(t) {
            return None;
        }
        let k = k as usize;
        (k < self.len()).then_some(k)
    }

    /// CSV with one row per state; the last row has no speed and no EDE residual.
    pub fn to_csv(&self, ede: &[f64]) -> String {
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            let (speed, res) = if k + 1 < self.len() {
                (format!("{}", self.step_w2[k] / self.tau), ede.get(k).map_or(String::new(), |r| format!("{r}")))
            } else {
                (String::new(), String::new())
            };
            out.push_str(&format!("{},{},{},{},{}\n", self.times[k], self.entropies[k], speed, self.fisher[k], res));
        }
        out
    }
}

/// Iterates [`jko_step`] up to time `t_end`, which must be a multiple of `tau`.
///
/// Fails if a step does not converge or raises the entropy.
pub fn jko_flow(
    mu0: &[f64],
    tau: f64,
    t_end: f64,
    space: &FinitePmmSpace,
    graph: &GraphDirichlet,
    params: &JkoParams,
) -> Result<FlowTrace> {
    check_start(mu0, space)?;
    if graph.n() != space.n() {
        return Err(Error::Dimension { expected: space.n(), got: graph.n() });
    }
    let steps = (t_end / tau).round();
    if !(t_end >= 0.0) || (steps * tau - t_end).abs() > 1e-9 * t_end.max(tau) {
        return invalid(format!("horizon {t_end} is not a multiple of tau {tau}"));
    }
    let kernel = Kernel::new(space, tau, params)?;
    let mut states = vec![mu0.to_vec()];
    let mut entropies = vec![entropy(mu0, space)];
    let mut residuals = Vec::new();
    for k in 0..steps as usize {
        let st = kernel.step(&states[k], params)?;
        let e = entropy(&st.nu, space);
        if e > entropies[k] + 1e-12 * (1.0 + entropies[k].abs()) {
            return invalid(format!("entropy increased at step {k}: {} -> {e}", entropies[k]));
        }
        entropies.push(e);
        residuals.push(st.kkt_residual);
        states.push(st.nu);
    }
    let mut step_w2 = Vec::with_capacity(states.len() - 1);
    for w in states.windows(2) {
        step_w2.push(w2(space, &w[0], &w[1])?);
    }
    Ok(FlowTrace {
        tau,
        times: (0..states.len()).map(|k| k as f64 * tau).collect(),
        fisher: states.iter().map(|s| fisher(s, graph)).collect(),
        step_w2,
        entropies,
        residuals,
        states,
    })
}
