//! Resolvent `J_τ = (I + τL)^{−1}` and the heat semigroup `H_t = e^{−tL}`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{dvec, iterative::cg, spectrum, LaplaceOperator, Spectrum, DENSE_CAP};
use crate::error::{invalid, Error, Result};

/// Relative residual required of every resolvent solve.
const SOLVE_TOL: f64 = 1e-10;

/// Reusable solver for `(I + τL) g = f`.
pub struct ResolventSolver<'a> {
    op: &'a LaplaceOperator,
    tau: f64,
    sqrt_m: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl<'a> ResolventSolver<'a> {
    pub fn new(op: &'a LaplaceOperator, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return invalid("tau must be positive");
        }
        let sqrt_m = op.mass().iter().map(|m| m.sqrt()).collect();
        let chol = if op.n() <= DENSE_CAP {
            let a = DMatrix::identity(op.n(), op.n()) + op.dense_sym() * tau;
            Some(Cholesky::new(a).ok_or_else(|| Error::InvalidInput("resolvent matrix not positive definite".into()))?)
        } else {
            None
        };
        Ok(Self { op, tau, sqrt_m, chol })
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.op.n();
        if f.len() != n {
            return Err(Error::Dimension { expected: n, got: f.len() });
        }
        let rhs: Vec<f64> = f.iter().zip(&self.sqrt_m).map(|(a, s)| a * s).collect();
        let y: Vec<f64> = match &self.chol {
            Some(c) => c.solve(&dvec(&rhs)).iter().copied().collect(),
            None => {
                let scaled: Vec<f64> = rhs.iter().map(|x| x / self.tau).collect();
                cg(self.op, 1.0 / self.tau, &scaled, &rhs, 1e-13)
            }
        };
        let g: Vec<f64> = y.iter().zip(&self.sqrt_m).map(|(a, s)| a / s).collect();
        let lg = self.op.apply(&g);
        let r: Vec<f64> = (0..n).map(|i| g[i] + self.tau * lg[i] - f[i]).collect();
        let res = self.op.norm(&r);
        let scale = self.op.norm(f).max(f64::MIN_POSITIVE);
        if !(res <= SOLVE_TOL * scale) {
            return Err(Error::NoConvergence { solver: "resolvent", residual: res / scale });
        }
        Ok(g)
    }
}

/// `J_τ f`, the minimizer of `‖g − f‖²_m/(2τ) + E(g)`.
pub fn resolvent(op: &LaplaceOperator, f: &[f64], tau: f64) -> Result<Vec<f64>> {
    ResolventSolver::new(op, tau)?.apply(f)
}

/// `‖g − f‖²_m/(2τ) + E(g)`.
pub fn resolvent_objective(op: &LaplaceOperator, f: &[f64], tau: f64, g: &[f64]) -> f64 {
    let d: Vec<f64> = g.iter().zip(f).map(|(a, b)| a - b).collect();
    op.inner(&d, &d) / (2.0 * tau) + op.energy(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeatMode {
    /// `J_{t/k}^k f`.
    Resolvent { k_steps: usize },
    /// Full eigendecomposition.
    Spectral,
}

/// `H_t f`, exactly or by iterated resolvents.
pub fn heat_semigroup(op: &LaplaceOperator, f: &[f64], t: f64, mode: HeatMode) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return invalid("time must be nonnegative");
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    match mode {
        HeatMode::Resolvent { k_steps } => {
            if k_steps == 0 {
                return invalid("k_steps must be at least 1");
            }
            let solver = ResolventSolver::new(op, t / k_steps as f64)?;
            let mut g = f.to_vec();
            for _ in 0..k_steps {
                g = solver.apply(&g)?;
            }
            Ok(g)
        }
        HeatMode::Spectral => {
            let spec = spectrum(op, op.n())?;
            Ok(spec.heat(op.mass(), f, t))
        }
    }
}

/// The heat flow of a probability measure: `(H_t(μ/m))·m`, with round-off
/// negatives clipped and the total renormalized to 1.
pub fn heat_measure(spec: &Spectrum, mass: &[f64], mu0: &[f64], t: f64) -> Vec<f64> {
    let f: Vec<f64> = mu0.iter().zip(mass).map(|(a, m)| a / m).collect();
    let mut mu: Vec<f64> = spec.heat(mass, &f, t).iter().zip(mass).map(|(g, m)| (g * m).max(0.0)).collect();
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= s);
    mu
}
