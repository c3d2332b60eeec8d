//! Discrete checks of the energy identity, contraction and a priori bounds
//! along a [`FlowTrace`].

use super::{entropy, fisher, FlowTrace, GraphDirichlet};
use crate::error::{invalid, Result};
use crate::space::{exp_tilt, FinitePmmSpace};
use crate::transport::w2;

/// `I_K(t) = ∫₀ᵗ e^{Ks} ds`.
pub fn i_k(k: f64, t: f64) -> f64 {
    if k == 0.0 {
        t
    } else {
        (k * t).exp_m1() / k
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdeReport {
    /// `|Ent(μ_k) − Ent(μ_{k+1}) − ½(speed² + fisher(μ_k))τ|` per interval.
    pub residuals: Vec<f64>,
    /// `Ent(μ_{k+1}) + ½ speed² τ + ½ fisher(μ_{k+1}) τ − Ent(μ_k)`; positive values
    /// break the one-step dissipation inequality satisfied by exact minimizing movements.
    pub edi_excess: Vec<f64>,
    /// Intervals where the excess is above round-off.
    pub flagged: Vec<usize>,
}

impl EdeReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Left-endpoint Riemann sums of the energy dissipation identity, with the
/// metric speed taken as `W₂(μ_k, μ_{k+1})/τ` and the squared slope as Fisher information.
pub fn ede_residual(trace: &FlowTrace, graph: &GraphDirichlet) -> EdeReport {
    let tau = trace.tau;
    let fish: Vec<f64> = trace.states.iter().map(|s| fisher(s, graph)).collect();
    let mut residuals = Vec::new();
    let mut edi_excess = Vec::new();
    let mut flagged = Vec::new();
    for k in 0..trace.step_w2.len() {
        let speed = trace.step_w2[k] / tau;
        let drop = trace.entropies[k] - trace.entropies[k + 1];
        residuals.push((drop - 0.5 * (speed * speed + fish[k]) * tau).abs());
        let excess = 0.5 * (speed * speed + fish[k + 1]) * tau - drop;
        if excess > 1e-9 * (1.0 + trace.entropies[k].abs()) {
            flagged.push(k);
        }
        edi_excess.push(excess);
    }
    EdeReport { residuals, edi_excess, flagged }
}

/// `max_t W₂(μ_t, ν_t) − e^{−Kt} W₂(μ₀, ν₀)` (at least 0, the value at `t = 0`).
pub fn contraction_check(a: &FlowTrace, b: &FlowTrace, space: &FinitePmmSpace, k: f64) -> Result<f64> {
    if a.len() != b.len() || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12 * (1.0 + s.abs())) {
        return invalid("traces must share their time grid");
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let d0 = w2(space, &a.states[0], &b.states[0])?;
    let mut worst: f64 = 0.0;
    for i in 1..a.len() {
        let d = w2(space, &a.states[i], &b.states[i])?;
        worst = worst.max(d - (-k * a.times[i]).exp() * d0);
    }
    Ok(worst)
}

const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    /// Horizon `1/(8C)`.
    pub horizon: f64,
    /// `½ Σ |μ̇|² τ` over steps ending by the horizon.
    pub speed_lhs: f64,
    /// `2 Ent(μ̄) + 4C Σ d² μ̄ + 2 log z`.
    pub speed_rhs: f64,
    /// Smallest slack `rhs − lhs` of the entropy/slope bound over trace times in
    /// `(0, horizon]` and both comparison measures (tilted and normalized reference).
    pub estimate_slack: f64,
    /// Time at which the smallest slack occurs.
    pub worst_time: f64,
}

impl AprioriReport {
    pub fn speed_slack(&self) -> f64 {
        self.speed_rhs - self.speed_lhs
    }

    /// Both slacks nonnegative up to round-off.
    pub fn passed(&self) -> bool {
        self.speed_slack() >= -ROUNDOFF && self.estimate_slack >= -ROUNDOFF
    }
}

/// Evaluates the speed bound on `[0, 1/(8C)]` and the bound
/// `I_K(t) Ent(μ_t) + I_K(t)²/2 · fisher(μ_t) ≤ I_K(t) Ent(ν) + ½ W₂²(ν, μ̄)`
/// with discrete sums along the trace.
pub fn apriori_check(
    trace: &FlowTrace,
    space: &FinitePmmSpace,
    graph: &GraphDirichlet,
    c: f64,
    k: f64,
) -> Result<AprioriReport> {
    if !(c > 0.0) {
        return invalid("C must be positive");
    }
    let horizon = 1.0 / (8.0 * c);
    let last = *trace.times.last().unwrap_or(&0.0);
    if last < horizon * (1.0 - 1e-9) {
        return invalid(format!("trace ends at {last}, before the horizon {horizon}"));
    }
    let tol = 1e-9 * horizon;
    let start = &trace.states[0];
    let speed_lhs: f64 = (0..trace.step_w2.len())
        .filter(|&i| trace.times[i + 1] <= horizon + tol)
        .map(|i| {
            let dt = trace.times[i + 1] - trace.times[i];
            0.5 * (trace.step_w2[i] / dt).powi(2) * dt
        })
        .sum();
    let (z, tilted) = exp_tilt(space, c);
    let moment: f64 = space.base_distances().iter().zip(start).map(|(d, p)| d * d * p).sum();
    let speed_rhs = 2.0 * entropy(start, space) + 4.0 * c * moment + 2.0 * z.ln();

    let total = space.total_mass();
    let normalized: Vec<f64> = space.mass().iter().map(|x| x / total).collect();
    let comparisons = [tilted.mass().to_vec(), normalized];
    let mut refs = Vec::new();
    for nu in &comparisons {
        refs.push((entropy(nu, space), w2(space, nu, start)?.powi(2)));
    }
    let mut estimate_slack = f64::INFINITY;
    let mut worst_time = 0.0;
    for i in 1..trace.len() {
        let t = trace.times[i];
        if t > horizon + tol {
            break;
        }
        let ik = i_k(k, t);
        let lhs = ik * trace.entropies[i] + 0.5 * ik * ik * fisher(&trace.states[i], graph);
        for &(ent_nu, w2sq) in &refs {
            let slack = ik * ent_nu + 0.5 * w2sq - lhs;
            if slack < estimate_slack {
                estimate_slack = slack;
                worst_time = t;
            }
        }
    }
    Ok(AprioriReport { horizon, speed_lhs, speed_rhs, estimate_slack, worst_time })
}

#[cfg(test)]
mod tests {
    use super::super::{jko_flow, JkoParams};
    use super::*;
    use nalgebra::DMatrix;

    fn circle(n: usize) -> (FinitePmmSpace, GraphDirichlet) {
        let h = 1.0 / n as f64;
        let dist = DMatrix::from_fn(n, n, |i, j| i.abs_diff(j).min(n - i.abs_diff(j)) as f64 * h);
        let s = FinitePmmSpace::new(dist, vec![h; n], 0).unwrap();
        let g = GraphDirichlet::eps_graph(&s, h, 1.0).unwrap();
        (s, g)
    }

    #[test]
    fn i_k_branches() {
        assert_eq!(i_k(0.0, 0.0), 0.0);
        assert_eq!(i_k(2.0, 0.0), 0.0);
        assert_eq!(i_k(0.0, 0.7), 0.7);
        assert!((i_k(1.0, 1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_trace() {
        let (s, g) = circle(8);
        let m = vec![0.125; 8];
        let tr = jko_flow(&m, 0.025, 0.125, &s, &g, &JkoParams::default()).unwrap();
        let ede = ede_residual(&tr, &g);
        assert!(ede.max_residual() < 1e-12);
        assert!(contraction_check(&tr, &tr, &s, 0.0).unwrap() == 0.0);
        let rep = apriori_check(&tr, &s, &g, 1.0, 0.0).unwrap();
        assert!(rep.speed_lhs < 1e-12);
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn two_atom_start_on_circle() {
        let (s, g) = circle(32);
        let mut mu = vec![0.001 / 32.0; 32];
        mu[0] += 0.4995;
        mu[8] += 0.4995;
        let p = JkoParams::default();
        let coarse = jko_flow(&mu, 1e-2, 0.13, &s, &g, &p).unwrap();
        let fine = jko_flow(&mu, 1e-3, 0.125, &s, &g, &p).unwrap();
        assert!(ede_residual(&fine, &g).max_residual() < ede_residual(&coarse, &g).max_residual());
        let rep = apriori_check(&fine, &s, &g, 1.0, 0.0).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(apriori_check(&fine, &s, &g, 0.5, 0.0).is_err());
    }

    #[test]
    fn mismatched_grids_rejected() {
        let (s, g) = circle(8);
        let m = vec![0.125; 8];
        let a = jko_flow(&m, 0.01, 0.02, &s, &g, &JkoParams::default()).unwrap();
        let b = jko_flow(&m, 0.01, 0.03, &s, &g, &JkoParams::default()).unwrap();
        assert!(contraction_check(&a, &b, &s, 0.0).is_err());
    }
}
