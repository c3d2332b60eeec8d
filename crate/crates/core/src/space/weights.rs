//! Radial weights `ψ` and cutoffs `ζ`.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How a weight function was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightProvenance {
    ExplicitFormula,
    Tabulated,
}

/// A positive nonincreasing weight `r ↦ ψ(r)` applied to the distance from the basepoint.
#[derive(Clone)]
pub struct WeightSpec {
    f: ScalarFn,
    provenance: WeightProvenance,
    name: String,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("name", &self.name)
            .field("provenance", &self.provenance)
            .finish()
    }
}

/// Outcome of sampling the weight invariants on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub positive: bool,
    pub nonincreasing: bool,
    /// `ψ(r_max) / ψ(0)` on the grid; small means the weight decays.
    pub decay_ratio: f64,
}

impl WeightSpec {
    pub fn from_fn(
        name: impl Into<String>,
        provenance: WeightProvenance,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), provenance, name: name.into() }
    }

    /// `ψ ≡ c`. With `c = 1` the weighted distance reduces to the normalized one.
    pub fn constant(c: f64) -> Self {
        Self::from_fn(format!("const:{c}"), WeightProvenance::ExplicitFormula, move |_| c)
    }

    /// `ψ(r) = exp(-c r²)`.
    pub fn gaussian(c: f64) -> Self {
        Self::from_fn(format!("gauss:{c}"), WeightProvenance::ExplicitFormula, move |r| {
            (-c * r * r).exp()
        })
    }

    /// The weight generated by the growth bound `φ ≡ 1`.
    pub fn cubic_tail() -> Self {
        let mut w = psi_from_growth(|_| 1.0).expect("constant growth is admissible");
        w.name = "cubic-tail".into();
        w
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn provenance(&self) -> WeightProvenance {
        self.provenance
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Samples positivity, monotonicity and decay on `r_k = r_max·k/(samples-1)`.
    pub fn check(&self, r_max: f64, samples: usize) -> WeightReport {
        let samples = samples.max(2);
        let vals: Vec<f64> = (0..samples)
            .map(|k| self.eval(r_max * k as f64 / (samples - 1) as f64))
            .collect();
        WeightReport {
            positive: vals.iter().all(|&v| v > 0.0 && v.is_finite()),
            nonincreasing: vals.windows(2).all(|w| w[1] <= w[0]),
            decay_ratio: vals[samples - 1] / vals[0],
        }
    }
}

/// A cutoff `ζ` with `ζ ≡ 1` on `[0,1]` and `ζ ≡ 0` on `[2,∞)`.
#[derive(Clone)]
pub struct CutoffSpec {
    f: ScalarFn,
    lipschitz: f64,
}

impl fmt::Debug for CutoffSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CutoffSpec").field("lipschitz", &self.lipschitz).finish()
    }
}

impl Default for CutoffSpec {
    /// `ζ(r) = min(1, max(0, 2 - r))`, Lipschitz constant 1.
    fn default() -> Self {
        Self { f: Arc::new(|r: f64| (2.0 - r).clamp(0.0, 1.0)), lipschitz: 1.0 }
    }
}

impl CutoffSpec {
    /// Wraps `f` after checking the plateau/support conditions on a grid.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lipschitz: f64) -> Result<Self> {
        for k in 0..=400 {
            let r = k as f64 * 0.01;
            let v = f(r);
            let ok = (0.0..=1.0).contains(&v)
                && (r > 1.0 || v == 1.0)
                && (r < 2.0 || v == 0.0);
            if !ok {
                return Err(Error::InvalidInput(format!("cutoff value {v} at r = {r} is not admissible")));
            }
        }
        Ok(Self { f: Arc::new(f), lipschitz })
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

const GRID_FIRST: f64 = 1e-3;
const GRID_RATIO: f64 = 1.25;
const GRID_LAST: f64 = 1e4;
const QUAD_TOL: f64 = 1e-13;

struct PsiTable {
    phi: ScalarFn,
    /// Grid nodes, starting at 0.
    nodes: Vec<f64>,
    /// `ψ(nodes[k])`.
    values: Vec<f64>,
}

impl PsiTable {
    fn integrand(&self, s: f64) -> f64 {
        let c = 1.0 + s * s * s;
        1.0 / (c * c * (self.phi)(s))
    }

    /// `∫_r^∞ ds / (s⁶ φ(s))`-type tail, bounded above by `1/(5 r⁵ φ(r))`.
    fn tail(&self, r: f64) -> f64 {
        1.0 / (5.0 * r.powi(5) * (self.phi)(r))
    }

    fn eval(&self, r: f64) -> f64 {
        let last = *self.nodes.last().unwrap();
        if r >= last {
            return self.tail(r);
        }
        let r = r.max(0.0);
        let k = self.nodes.partition_point(|&x| x <= r);
        // nodes[k-1] <= r < nodes[k]
        let hi = self.nodes[k];
        let part = quadrature::integrate(|s| self.integrand(s), r, hi, QUAD_TOL).integral;
        self.values[k] + part
    }
}

/// `ψ(r) = ∫_r^∞ ds / ((1+s³)² φ(s))` for a nondecreasing growth bound `φ` with `φ(0) > 0`.
///
/// The integral is tabulated on a geometric grid; values between nodes are
/// completed by an exact quadrature over the partial cell, so the weight is
/// monotone and accurate everywhere. Beyond the grid the tail `1/(5 r⁵ φ(r))`
/// is used, which bounds the integral from above.
pub fn psi_from_growth(phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<WeightSpec> {
    let phi: ScalarFn = Arc::new(phi);
    let p0 = phi(0.0);
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(Error::InvalidInput(format!("growth bound needs phi(0) > 0, got {p0}")));
    }
    let mut nodes = vec![0.0];
    let mut r = GRID_FIRST;
    while r < GRID_LAST {
        nodes.push(r);
        r *= GRID_RATIO;
    }
    nodes.push(GRID_LAST);

    let mut prev = p0;
    for &x in &nodes[1..] {
        let v = phi(x);
        if !v.is_finite() || v < prev {
            return Err(Error::InvalidInput(format!("growth bound must be finite and nondecreasing (fails at r = {x})")));
        }
        prev = v;
    }

    let mut table = PsiTable { phi, nodes, values: Vec::new() };
    let m = table.nodes.len();
    let mut values = vec![0.0; m];
    values[m - 1] = table.tail(GRID_LAST);
    for k in (0..m - 1).rev() {
        let (a, b) = (table.nodes[k], table.nodes[k + 1]);
        let bad = Cell::new(false);
        let out = quadrature::integrate(
            |s| {
                let v = table.integrand(s);
                if !v.is_finite() {
                    bad.set(true);
                }
                v
            },
            a,
            b,
            QUAD_TOL,
        );
        if bad.get() || !(out.error_estimate <= 1e-10 * out.integral.abs().max(1e-3)) {
            return Err(Error::Quadrature(format!(
                "cell [{a}, {b}]: estimate {:.3e} with error {:.3e}",
                out.integral, out.error_estimate
            )));
        }
        values[k] = values[k + 1] + out.integral;
    }
    table.values = values;
    let table = Arc::new(table);
    Ok(WeightSpec::from_fn("tabulated", WeightProvenance::Tabulated, move |r| table.eval(r)))
}
