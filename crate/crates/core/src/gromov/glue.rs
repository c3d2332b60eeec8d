//! Gluing two spaces along a relation.
//!
//! For finite spaces, every isometric embedding of `a` and `b` into a common
//! space restricts to a pseudometric on the disjoint union whose diagonal
//! blocks are `d_a` and `d_b`. Conversely every such block pseudometric is an
//! embedding (take the metric quotient). Hence an infimum over common spaces
//! equals an infimum over admissible cross-distance matrices.

use nalgebra::DMatrix;

use crate::space::{validate, FinitePmmSpace, ValidationReport};
use crate::transport::Coupling;

/// A pseudometric on `a ⊔ b` given by its off-diagonal block.
#[derive(Debug, Clone)]
pub struct GluedSpace<'a> {
    pub a: &'a FinitePmmSpace,
    pub b: &'a FinitePmmSpace,
    /// `cross[(i, j)] = d(ι_a x_i, ι_b y_j)`.
    pub cross: DMatrix<f64>,
    /// Uniform slack added on top of the relation distances.
    pub eta: f64,
}

impl<'a> GluedSpace<'a> {
    /// Distance between the two basepoints.
    pub fn base_gap(&self) -> f64 {
        self.cross[(self.a.base(), self.b.base())]
    }

    /// The full `(n_a + n_b)`-square distance matrix.
    pub fn block_metric(&self) -> DMatrix<f64> {
        block_metric(self.a, self.b, &self.cross)
    }

    /// The glued space carrying both measures, pointed at `a`'s basepoint.
    pub fn to_space(&self) -> FinitePmmSpace {
        let mass = self.a.mass().iter().chain(self.b.mass()).cloned().collect();
        FinitePmmSpace::new(self.block_metric(), mass, self.a.base()).expect("block metric is structurally valid")
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.to_space())
    }
}

pub(crate) fn block_metric(a: &FinitePmmSpace, b: &FinitePmmSpace, cross: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = (a.n(), b.n());
    DMatrix::from_fn(n1 + n2, n1 + n2, |i, j| match (i < n1, j < n1) {
        (true, true) => a.d(i, j),
        (false, false) => b.d(i - n1, j - n1),
        (true, false) => cross[(i, j - n1)],
        (false, true) => cross[(j, i - n1)],
    })
}

/// Largest violation of `d_a(i,i') ≤ X(i,j) + X(i',j)` and `d_b(j,j') ≤ X(i,j) + X(i,j')`, halved.
fn slack_needed(a: &FinitePmmSpace, b: &FinitePmmSpace, x: &DMatrix<f64>) -> f64 {
    let (n1, n2) = (a.n(), b.n());
    let mut eta: f64 = 0.0;
    for j in 0..n2 {
        for i in 0..n1 {
            for k in (i + 1)..n1 {
                eta = eta.max(a.d(i, k) - x[(i, j)] - x[(k, j)]);
            }
        }
    }
    for i in 0..n1 {
        for j in 0..n2 {
            for l in (j + 1)..n2 {
                eta = eta.max(b.d(j, l) - x[(i, j)] - x[(i, l)]);
            }
        }
    }
    0.5 * eta
}

/// Glues along a nonempty relation `R ⊂ X_a × X_b`:
/// `cross(i,j) = min_{(p,q)∈R} d_a(i,p) + d_b(q,j) + η` with the smallest uniform `η ≥ 0`
/// that makes the block matrix a pseudometric.
///
/// For an isometric relation `η = 0` and related points are identified.
pub fn glue_by_relation<'a>(a: &'a FinitePmmSpace, b: &'a FinitePmmSpace, relation: &[(usize, usize)]) -> GluedSpace<'a> {
    assert!(!relation.is_empty(), "gluing needs a nonempty relation");
    let (n1, n2) = (a.n(), b.n());
    let mut x = DMatrix::from_element(n1, n2, f64::INFINITY);
    for &(p, q) in relation {
        for j in 0..n2 {
            let dq = b.d(q, j);
            for i in 0..n1 {
                let v = a.d(i, p) + dq;
                if v < x[(i, j)] {
                    x[(i, j)] = v;
                }
            }
        }
    }
    let eta = slack_needed(a, b, &x);
    x.add_scalar_mut(eta);
    GluedSpace { a, b, cross: x, eta }
}

/// Pairs carrying mass in `coupling`.
pub fn coupling_support(coupling: &Coupling) -> Vec<(usize, usize)> {
    let max = coupling.plan.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-14 * max;
    let (n1, n2) = coupling.plan.shape();
    let mut r = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if coupling.plan[(i, j)] > cut {
                r.push((i, j));
            }
        }
    }
    r
}

/// Glues along the support of a coupling between (reweightings of) `a` and `b`.
pub fn glue_by_coupling<'a>(a: &'a FinitePmmSpace, b: &'a FinitePmmSpace, coupling: &Coupling) -> GluedSpace<'a> {
    glue_by_relation(a, b, &coupling_support(coupling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FinitePmmSpace {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>() * 2.0, rng.random::<f64>()]).collect();
        let mass = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
        FinitePmmSpace::from_points(&pts, mass, 0).unwrap()
    }

    #[test]
    fn point_spaces_glue_at_zero() {
        let p = FinitePmmSpace::point(1.0).unwrap();
        let c = Coupling::product(&[1.0], &[1.0]);
        let g = glue_by_coupling(&p, &p, &c);
        assert_eq!(g.cross[(0, 0)], 0.0);
    }

    #[test]
    fn identity_coupling_reproduces_the_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_space(&mut rng, 5);
        let mut plan = DMatrix::zeros(5, 5);
        for i in 0..5 {
            plan[(i, i)] = a.mass()[i];
        }
        let c = Coupling { plan, mu: a.mass().to_vec(), nu: a.mass().to_vec() };
        let g = glue_by_coupling(&a, &a, &c);
        assert_eq!(g.eta, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                assert!((g.cross[(i, j)] - a.d(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn random_gluings_are_pseudometrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = random_space(&mut rng, 4);
            let b = random_space(&mut rng, 4);
            let k = rng.random_range(1..6);
            let rel: Vec<(usize, usize)> = (0..k).map(|_| (rng.random_range(0..4), rng.random_range(0..4))).collect();
            let g = glue_by_relation(&a, &b, &rel);
            // brute-force triangle oracle on the block matrix
            let m = g.block_metric();
            for i in 0..8 {
                for j in 0..8 {
                    assert_eq!(m[(i, j)], m[(j, i)]);
                    for l in 0..8 {
                        assert!(m[(i, l)] <= m[(i, j)] + m[(j, l)] + 1e-12);
                    }
                }
            }
            assert!(g.validate().is_valid());
        }
    }
}
