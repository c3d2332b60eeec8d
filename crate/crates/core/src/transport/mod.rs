//! Optimal transport between discrete measures on a shared cost matrix.

mod simplex;
mod sinkhorn;

pub use sinkhorn::{sinkhorn, SinkhornReport};

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::space::FinitePmmSpace;

/// Tolerance on the difference of total masses.
pub const MARGINAL_TOL: f64 = 1e-8;

/// A transport plan with its marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Coupling {
    /// Largest deviation of the plan's marginals from `mu`, `nu` (or `∞` on a negative entry).
    pub fn marginal_error(&self) -> f64 {
        if self.plan.iter().any(|&x| x < 0.0) {
            return f64::INFINITY;
        }
        let rows = self
            .plan
            .row_iter()
            .zip(&self.mu)
            .map(|(r, m)| (r.sum() - m).abs());
        let cols = self
            .plan
            .column_iter()
            .zip(&self.nu)
            .map(|(c, m)| (c.sum() - m).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn cost(&self, cost: &DMatrix<f64>) -> f64 {
        self.plan.component_mul(cost).sum()
    }

    /// The product coupling `mu ⊗ nu / |mu|`.
    pub fn product(mu: &[f64], nu: &[f64]) -> Self {
        let t: f64 = mu.iter().sum();
        let plan = DMatrix::from_fn(mu.len(), nu.len(), |i, j| mu[i] * nu[j] / t);
        Self { plan, mu: mu.to_vec(), nu: nu.to_vec() }
    }
}

fn check_marginals(mu: &[f64], nu: &[f64], cost: &DMatrix<f64>) -> Result<()> {
    if cost.nrows() != mu.len() {
        return Err(Error::Dimension { expected: cost.nrows(), got: mu.len() });
    }
    if cost.ncols() != nu.len() {
        return Err(Error::Dimension { expected: cost.ncols(), got: nu.len() });
    }
    if mu.iter().chain(nu).any(|x| !x.is_finite() || *x < 0.0) {
        return invalid("marginals must be finite and nonnegative");
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return invalid("cost must be finite");
    }
    let gap = mu.iter().sum::<f64>() - nu.iter().sum::<f64>();
    if gap.abs() > MARGINAL_TOL {
        return Err(Error::MarginalMismatch(gap.abs()));
    }
    Ok(())
}

/// Exact optimal coupling and its value `⟨γ, cost⟩`.
///
/// Zero-mass rows and columns are removed before solving and reinserted as zeros.
pub fn optimal_coupling(mu: &[f64], nu: &[f64], cost: &DMatrix<f64>) -> Result<(Coupling, f64)> {
    check_marginals(mu, nu, cost)?;
    let rows: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    let mut plan = DMatrix::zeros(mu.len(), nu.len());
    if !rows.is_empty() && !cols.is_empty() {
        let a: Vec<f64> = rows.iter().map(|&i| mu[i]).collect();
        let mut b: Vec<f64> = cols.iter().map(|&j| nu[j]).collect();
        // absorb the admissible total-mass gap in the largest column
        let gap = a.iter().sum::<f64>() - b.iter().sum::<f64>();
        let jmax = (0..b.len()).max_by(|&x, &y| b[x].total_cmp(&b[y])).unwrap();
        b[jmax] += gap;
        let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cost[(rows[i], cols[j])]);
        let p = simplex::solve(&a, &b, &sub)?;
        for (ii, &i) in rows.iter().enumerate() {
            for (jj, &j) in cols.iter().enumerate() {
                plan[(i, j)] = p[(ii, jj)];
            }
        }
    }
    let coupling = Coupling { plan, mu: mu.to_vec(), nu: nu.to_vec() };
    let value = coupling.cost(cost);
    Ok((coupling, value))
}

/// Optimal value with the arguments in a canonical order, so that swapping
/// `μ` and `ν` (and transposing the cost) returns the bit-identical value.
fn symmetric_value(mu: &[f64], nu: &[f64], cost: &DMatrix<f64>) -> Result<f64> {
    let swap = mu.iter().zip(nu).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Greater);
    if swap {
        Ok(optimal_coupling(nu, mu, &cost.transpose())?.1)
    } else {
        Ok(optimal_coupling(mu, nu, cost)?.1)
    }
}

/// Elementwise `d²`.
pub fn squared(dist: &DMatrix<f64>) -> DMatrix<f64> {
    dist.map(|d| d * d)
}

/// Quadratic Wasserstein distance on an explicit metric matrix.
pub fn w2_dist(dist: &DMatrix<f64>, mu: &[f64], nu: &[f64]) -> Result<f64> {
    Ok(symmetric_value(mu, nu, &squared(dist))?.max(0.0).sqrt())
}

/// `W₂(μ, ν)` on the metric of `space`.
pub fn w2(space: &FinitePmmSpace, mu: &[f64], nu: &[f64]) -> Result<f64> {
    w2_dist(space.dist(), mu, nu)
}

/// A concave, bounded, nondecreasing cost profile `c` with `c(0) = 0`.
#[derive(Clone)]
pub struct ConcaveCost {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    name: String,
    sup: f64,
    slope0: f64,
}

impl fmt::Debug for ConcaveCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConcaveCost({})", self.name)
    }
}

impl ConcaveCost {
    /// Wraps `c` after sampling its defining properties on `[0, 4·sup]`.
    ///
    /// `slope0` is the right derivative at 0 (an upper bound on every
    /// difference quotient, by concavity).
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup: f64,
        slope0: f64,
    ) -> Result<Self> {
        if f(0.0) != 0.0 {
            return invalid("cost must vanish at 0");
        }
        let h = 1e-3;
        let xs: Vec<f64> = (0..=4000).map(|k| k as f64 * h * sup.max(1e-3)).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let tol = 1e-12 * sup.max(1.0);
        if ys.windows(2).any(|w| w[1] < w[0] - tol) {
            return invalid("cost must be nondecreasing");
        }
        if ys.iter().any(|&y| !(y <= sup + tol)) {
            return invalid("cost exceeds its declared supremum");
        }
        if ys.windows(3).any(|w| w[1] < 0.5 * (w[0] + w[2]) - tol) {
            return invalid("cost is not midpoint-concave");
        }
        if ys.iter().all(|&y| y == 0.0) {
            return invalid("cost must be non-constant");
        }
        Ok(Self { f: Arc::new(f), name: name.into(), sup, slope0 })
    }

    /// `c(d) = min(d, 1)`.
    pub fn min1() -> Self {
        Self::new("min1", |d: f64| d.min(1.0), 1.0, 1.0).expect("valid cost")
    }

    /// `c(d) = tanh(d)`.
    pub fn tanh() -> Self {
        Self::new("tanh", f64::tanh, 1.0, 1.0).expect("valid cost")
    }

    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        (self.f)(d)
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// Right derivative at 0.
    pub fn slope0(&self) -> f64 {
        self.slope0
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self, dist: &DMatrix<f64>) -> DMatrix<f64> {
        dist.map(|d| self.eval(d))
    }
}

/// Transport cost family.
#[derive(Debug, Clone)]
pub enum CostSpec {
    Quadratic,
    Concave(ConcaveCost),
}

impl CostSpec {
    pub fn matrix(&self, dist: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            CostSpec::Quadratic => squared(dist),
            CostSpec::Concave(c) => c.matrix(dist),
        }
    }
}

/// `W_c(μ, ν)` on an explicit metric matrix.
pub fn wc_dist(dist: &DMatrix<f64>, mu: &[f64], nu: &[f64], c: &ConcaveCost) -> Result<f64> {
    Ok(symmetric_value(mu, nu, &c.matrix(dist))?.max(0.0))
}

/// `W_c(μ, ν) = min Σ γ c(d)` on the metric of `space`.
pub fn wc(space: &FinitePmmSpace, mu: &[f64], nu: &[f64], c: &ConcaveCost) -> Result<f64> {
    wc_dist(space.dist(), mu, nu, c)
}

/// `Σ_{d(·,x̄) > R} d²(·, x̄) μ`.
pub fn tail_second_moment(space: &FinitePmmSpace, mu: &[f64], r: f64) -> f64 {
    (0..space.n())
        .map(|i| (space.d(i, space.base()), mu[i]))
        .filter(|&(d, _)| d > r)
        .map(|(d, m)| d * d * m)
        .sum()
}
