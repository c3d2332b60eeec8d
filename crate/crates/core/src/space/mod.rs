//! Finite pointed metric measure spaces.
//!
//! A space is a symmetric distance matrix, a nonnegative mass vector and a
//! basepoint index. The support of the measure is `{i : mass[i] > 0}`;
//! completeness and separability are automatic for finite sets.

mod geometry;
mod io;
mod iso;
mod weights;

pub use geometry::{covering_number, doubling_constant, exact_cover_size, greedy_cover};
pub use io::{load_space, save_space, space_from_json, space_to_json, SpaceFile};
pub use iso::{is_isomorphic, IsoCertificate, IsoOutcome, DEFAULT_ISO_CAP};
pub use weights::{psi_from_growth, CutoffSpec, WeightProvenance, WeightReport, WeightSpec};

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Relative slack used for the triangle inequality check.
pub const TRIANGLE_SLACK: f64 = 1e-9;

/// A finite pointed metric measure space `(X, d, m, x̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmmSpace {
    dist: DMatrix<f64>,
    mass: Vec<f64>,
    base: usize,
}

impl FinitePmmSpace {
    /// Builds a space after structural checks (shapes, finiteness, signs).
    ///
    /// Metric axioms are not enforced here; use [`validate`] for a full report.
    pub fn new(dist: DMatrix<f64>, mass: Vec<f64>, base: usize) -> Result<Self> {
        let n = mass.len();
        if n == 0 {
            return invalid("space must have at least one point");
        }
        if dist.nrows() != n || dist.ncols() != n {
            return invalid(format!(
                "distance matrix is {}x{}, mass has {} entries",
                dist.nrows(),
                dist.ncols(),
                n
            ));
        }
        if base >= n {
            return invalid(format!("basepoint {base} out of range 0..{n}"));
        }
        if dist.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return invalid("distances must be finite and nonnegative");
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return invalid("masses must be finite and nonnegative");
        }
        Ok(Self { dist, mass, base })
    }

    /// Builds a space from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], mass: Vec<f64>, base: usize) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("distance rows must form a square matrix");
        }
        let dist = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::new(dist, mass, base)
    }

    /// Euclidean distances between coordinate vectors.
    pub fn from_points(points: &[Vec<f64>], mass: Vec<f64>, base: usize) -> Result<Self> {
        let n = points.len();
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return invalid("all points must have the same dimension");
        }
        let dist = DMatrix::from_fn(n, n, |i, j| {
            points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        });
        Self::new(dist, mass, base)
    }

    /// The one-point space carrying `mass` at its basepoint.
    pub fn point(mass: f64) -> Result<Self> {
        Self::new(DMatrix::zeros(1, 1), vec![mass], 0)
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `d(·, x̄)` as a vector.
    pub fn base_distances(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.d(i, self.base)).collect()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.mass[i] > 0.0).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest distance from the basepoint to a support point.
    pub fn support_radius(&self) -> f64 {
        self.support()
            .into_iter()
            .map(|i| self.d(i, self.base))
            .fold(0.0, f64::max)
    }

    /// Same metric and basepoint, new masses.
    pub fn with_mass(&self, mass: Vec<f64>) -> Result<Self> {
        Self::new(self.dist.clone(), mass, self.base)
    }

    /// Relabels points: old index `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return invalid("relabeling must be a permutation");
        }
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let dist = DMatrix::from_fn(n, n, |a, b| self.d(inv[a], inv[b]));
        let mass = (0..n).map(|a| self.mass[inv[a]]).collect();
        Self::new(dist, mass, perm[self.base])
    }

    /// Restriction to an index subset (basepoint must be included).
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let Some(base) = keep.iter().position(|&i| i == self.base) else {
            return invalid("restriction must keep the basepoint");
        };
        let k = keep.len();
        let dist = DMatrix::from_fn(k, k, |a, b| self.d(keep[a], keep[b]));
        let mass = keep.iter().map(|&i| self.mass[i]).collect();
        Self::new(dist, mass, base)
    }
}

/// A violated invariant of a [`FinitePmmSpace`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonzeroDiagonal { i: usize },
    Asymmetric { i: usize, j: usize },
    /// `d(i, k) > d(i, j) + d(j, k)` beyond the slack.
    Triangle { i: usize, j: usize, k: usize },
    NoPositiveMass,
    BaseOutsideSupport { base: usize },
}

/// Every violated invariant, in scan order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks metric axioms and measure conditions.
///
/// The triangle inequality is tested with additive slack
/// `TRIANGLE_SLACK × diameter` to absorb coordinate rounding.
pub fn validate(space: &FinitePmmSpace) -> ValidationReport {
    let n = space.n();
    let mut violations = Vec::new();
    for i in 0..n {
        if space.d(i, i) != 0.0 {
            violations.push(Violation::NonzeroDiagonal { i });
        }
        for j in (i + 1)..n {
            if space.d(i, j) != space.d(j, i) {
                violations.push(Violation::Asymmetric { i, j });
            }
        }
    }
    let slack = TRIANGLE_SLACK * space.diameter();
    for i in 0..n {
        for k in (i + 1)..n {
            let dik = space.d(i, k);
            for j in 0..n {
                if j != i && j != k && dik > space.d(i, j) + space.d(j, k) + slack {
                    violations.push(Violation::Triangle { i, j, k });
                }
            }
        }
    }
    if !space.mass.iter().any(|&m| m > 0.0) {
        violations.push(Violation::NoPositiveMass);
    } else if space.mass[space.base] <= 0.0 {
        violations.push(Violation::BaseOutsideSupport { base: space.base });
    }
    ValidationReport { violations }
}

/// Drops zero-mass points; returns the restricted space and the kept indices.
pub fn support_restrict(space: &FinitePmmSpace) -> Result<(FinitePmmSpace, Vec<usize>)> {
    let keep = space.support();
    if !keep.contains(&space.base) {
        return invalid("basepoint carries no mass");
    }
    Ok((space.restrict(&keep)?, keep))
}

/// `m_[k](x) = ζ(d(x, x̄) 2^{-k}) m(x)`.
pub fn cutoff_rescale(space: &FinitePmmSpace, k: i32, zeta: &CutoffSpec) -> FinitePmmSpace {
    let scale = 2f64.powi(-k);
    let mass = (0..space.n())
        .map(|i| zeta.eval(space.d(i, space.base) * scale) * space.mass[i])
        .collect();
    FinitePmmSpace { dist: space.dist.clone(), mass, base: space.base }
}

/// `(z_ψ, m_ψ)` with `z_ψ = Σ ψ(d(·, x̄)) m` and `m_ψ = ψ(d(·, x̄)) m / z_ψ`.
pub fn reweight(space: &FinitePmmSpace, psi: &WeightSpec) -> (f64, FinitePmmSpace) {
    let w: Vec<f64> = (0..space.n())
        .map(|i| psi.eval(space.d(i, space.base)) * space.mass[i])
        .collect();
    normalized(space, w)
}

/// `(z, m̃)` with `z = Σ e^{-C d²(·, x̄)} m` and `m̃ = e^{-C d²} m / z`.
///
/// Any `C > 0` is admissible: on a finite space the growth condition that
/// restricts `C` from below is vacuous.
pub fn exp_tilt(space: &FinitePmmSpace, c: f64) -> (f64, FinitePmmSpace) {
    let w: Vec<f64> = (0..space.n())
        .map(|i| {
            let r = space.d(i, space.base);
            (-c * r * r).exp() * space.mass[i]
        })
        .collect();
    normalized(space, w)
}

fn normalized(space: &FinitePmmSpace, w: Vec<f64>) -> (f64, FinitePmmSpace) {
    let z: f64 = w.iter().sum();
    let mass = w.into_iter().map(|x| x / z).collect();
    (z, FinitePmmSpace { dist: space.dist.clone(), mass, base: space.base })
}
