use nalgebra::DMatrix;

use super::{check_marginals, Coupling};
use crate::error::Result;

/// Convergence data for [`sinkhorn`].
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornReport {
    pub iterations: usize,
    /// Largest marginal violation of the unrounded plan.
    pub marginal_error: f64,
    pub converged: bool,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport with log-domain updates.
///
/// The returned plan is rounded onto the transport polytope, so it is exactly
/// feasible; the value is its cost `⟨P, C⟩`. The value typically exceeds the
/// exact optimum by `O(eps · log n)` — this is not certified.
pub fn sinkhorn(
    mu: &[f64],
    nu: &[f64],
    cost: &DMatrix<f64>,
    eps: f64,
    max_iter: usize,
) -> Result<(f64, Coupling, SinkhornReport)> {
    check_marginals(mu, nu, cost)?;
    let (m, n) = (mu.len(), nu.len());
    let la: Vec<f64> = mu.iter().map(|x| x.ln()).collect();
    let lb: Vec<f64> = nu.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let tol = 1e-9;
    let mut report = SinkhornReport { iterations: 0, marginal_error: f64::INFINITY, converged: false };

    let plan_of = |f: &[f64], g: &[f64]| {
        DMatrix::from_fn(m, n, |i, j| {
            if mu[i] == 0.0 || nu[j] == 0.0 {
                0.0
            } else {
                ((f[i] + g[j] - cost[(i, j)]) / eps).exp()
            }
        })
    };

    for it in 1..=max_iter {
        for i in 0..m {
            if mu[i] > 0.0 {
                let lse = log_sum_exp((0..n).filter(|&j| nu[j] > 0.0).map(|j| (g[j] - cost[(i, j)]) / eps));
                f[i] = eps * (la[i] - lse);
            }
        }
        for j in 0..n {
            if nu[j] > 0.0 {
                let lse = log_sum_exp((0..m).filter(|&i| mu[i] > 0.0).map(|i| (f[i] - cost[(i, j)]) / eps));
                g[j] = eps * (lb[j] - lse);
            }
        }
        report.iterations = it;
        if it % 10 == 0 || it == max_iter {
            // columns are exact after the g-update; rows carry the error
            let p = plan_of(&f, &g);
            let err = p.row_iter().zip(mu).map(|(r, a)| (r.sum() - a).abs()).fold(0.0, f64::max);
            report.marginal_error = err;
            if err <= tol {
                report.converged = true;
                break;
            }
        }
    }

    let plan = round_to_polytope(plan_of(&f, &g), mu, nu);
    let coupling = Coupling { plan, mu: mu.to_vec(), nu: nu.to_vec() };
    let value = coupling.cost(cost);
    Ok((value, coupling, report))
}

/// Projects a positive plan onto the couplings of `(mu, nu)`: scale rows and
/// columns down, then redistribute the deficit as a rank-one correction.
fn round_to_polytope(mut p: DMatrix<f64>, mu: &[f64], nu: &[f64]) -> DMatrix<f64> {
    for (i, &a) in mu.iter().enumerate() {
        let r = p.row(i).sum();
        if r > a {
            p.row_mut(i).scale_mut(a / r);
        }
    }
    for (j, &b) in nu.iter().enumerate() {
        let c = p.column(j).sum();
        if c > b {
            p.column_mut(j).scale_mut(b / c);
        }
    }
    let er: Vec<f64> = mu.iter().enumerate().map(|(i, a)| (a - p.row(i).sum()).max(0.0)).collect();
    let ec: Vec<f64> = nu.iter().enumerate().map(|(j, b)| (b - p.column(j).sum()).max(0.0)).collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                p[(i, j)] += er[i] * ec[j] / total;
            }
        }
    }
    p
}
