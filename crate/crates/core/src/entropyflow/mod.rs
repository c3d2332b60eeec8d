//! Relative entropy, Fisher information, the minimizing-movement heat flow
//! and checks of its energy identities.

mod checks;
mod graph;
mod jko;

pub use checks::{apriori_check, contraction_check, ede_residual, i_k, AprioriReport, EdeReport};
pub use graph::{GraphDirichlet, GraphProvenance};
pub use jko::{jko_flow, jko_step, FlowTrace, JkoParams, JkoStep, TRACE_CSV_HEADER};

use crate::error::{invalid, Result};
use crate::space::{exp_tilt, FinitePmmSpace};
use crate::transport::{w2, Coupling};

/// Values below this are treated as zero before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// `Ent_m(μ) = Σ μ log(μ/m)` with `0 log 0 = 0`; `+∞` if `μ` charges a massless point.
pub fn entropy_wrt(mu: &[f64], mass: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&p, &m) in mu.iter().zip(mass) {
        if p <= DENSITY_FLOOR {
            continue;
        }
        if m <= 0.0 {
            return f64::INFINITY;
        }
        s += p * (p / m).ln();
    }
    s
}

/// Relative entropy of `mu` with respect to the measure of `space`.
pub fn entropy(mu: &[f64], space: &FinitePmmSpace) -> f64 {
    entropy_wrt(mu, space.mass())
}

/// Both sides of `Ent_m(μ) = Ent_{m̃}(μ) − C Σ d²(·,x̄) μ − log z` and their gap.
pub fn entropy_decomposition(mu: &[f64], space: &FinitePmmSpace, c: f64) -> (f64, f64, f64) {
    let (z, tilted) = exp_tilt(space, c);
    let lhs = entropy(mu, space);
    let moment: f64 = space.base_distances().iter().zip(mu).map(|(d, p)| d * d * p).sum();
    let rhs = entropy(mu, &tilted) - c * moment - z.ln();
    (lhs, rhs, (lhs - rhs).abs())
}

/// Density `μ / m` (zero where `m` vanishes).
pub fn density(mu: &[f64], mass: &[f64]) -> Vec<f64> {
    mu.iter().zip(mass).map(|(&p, &m)| if m > 0.0 { p / m } else { 0.0 }).collect()
}

/// Fisher information `8 E(√ρ)`, the discrete squared slope of the entropy.
pub fn fisher(mu: &[f64], graph: &GraphDirichlet) -> f64 {
    let sq: Vec<f64> = density(mu, graph.node_mass()).into_iter().map(|r| r.max(0.0).sqrt()).collect();
    8.0 * graph.energy(&sq)
}

/// Lower estimate of the descending slope from a candidate set:
/// `sup_ν [(Ent(μ) − Ent(ν))/W₂(μ,ν) + (K/2) W₂(μ,ν)]⁺`.
pub fn slope_sup(mu: &[f64], space: &FinitePmmSpace, k: f64, candidates: &[Vec<f64>]) -> Result<f64> {
    let e = entropy(mu, space);
    if !e.is_finite() {
        return invalid("slope needs finite entropy");
    }
    let mut best: f64 = 0.0;
    for nu in candidates {
        let w = w2(space, mu, nu)?;
        if w <= 0.0 {
            continue;
        }
        best = best.max((e - entropy(nu, space)) / w + 0.5 * k * w);
    }
    Ok(best)
}

/// Recovery measure for `μ = ρ m_∞` along a coupling of the normalized
/// reference measures `m̃_∞ → m̃_n`: `μ_n(y) = Σ_x γ(x, y) ρ̃(x)` with
/// `ρ̃ = dμ/dm̃_∞`.
///
/// By Jensen, `Ent_{m̃_n}(μ_n) ≤ Ent_{m̃_∞}(μ)`.
pub fn recovery_sequence(mu_inf: &[f64], coupling: &Coupling) -> Result<Vec<f64>> {
    let (r, c) = coupling.plan.shape();
    if mu_inf.len() != r {
        return invalid("measure and coupling sizes differ");
    }
    let rho: Vec<f64> = density(mu_inf, &coupling.mu);
    Ok((0..c).map(|j| (0..r).map(|i| coupling.plan[(i, j)] * rho[i]).sum()).collect())
}
