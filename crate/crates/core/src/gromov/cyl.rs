//! Cylindrical pushforwards `m^N = (j^N)_♯ (δ_x̄ ⊗ m^{⊗(N-1)})` on the cone of
//! `N × N` distance matrices, and the reconstruction check built on them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::space::{is_isomorphic, support_restrict, FinitePmmSpace, IsoOutcome};
use crate::transport::{optimal_coupling, ConcaveCost};

/// Default cap on the number of atoms `|supp m|^{N-1}`.
pub const DEFAULT_CYL_ATOM_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CylAtom {
    /// Row-major `N × N` matrix `g_ab = d(x_a, x_b)` with `x_1 = x̄`.
    pub g: Vec<f64>,
    pub weight: f64,
}

/// Atoms sorted lexicographically by matrix entries, then weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CylMeasure {
    pub order: usize,
    pub atoms: Vec<CylAtom>,
}

impl CylMeasure {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Multiset equality with absolute tolerance on entries and weights.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.order == other.order
            && self.atoms.len() == other.atoms.len()
            && self.atoms.iter().zip(&other.atoms).all(|(x, y)| {
                (x.weight - y.weight).abs() <= tol && x.g.iter().zip(&y.g).all(|(p, q)| (p - q).abs() <= tol)
            })
    }

    /// Equal matrices merged into one atom.
    fn merged(&self) -> Vec<CylAtom> {
        let mut out: Vec<CylAtom> = Vec::new();
        for a in &self.atoms {
            match out.last_mut() {
                Some(last) if last.g == a.g => last.weight += a.weight,
                _ => out.push(a.clone()),
            }
        }
        out
    }
}

fn lex(x: &CylAtom, y: &CylAtom) -> std::cmp::Ordering {
    x.g.iter()
        .zip(&y.g)
        .map(|(p, q)| p.total_cmp(q))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(x.weight.total_cmp(&y.weight))
}

/// One atom per `(N-1)`-tuple of support points, weighted by the product of their masses.
pub fn cyl_pushforward(space: &FinitePmmSpace, order: usize, atom_cap: usize) -> Result<CylMeasure> {
    if order < 2 {
        return Err(Error::InvalidInput(format!("order must be at least 2, got {order}")));
    }
    let (s, _) = support_restrict(space)?;
    let k = s.n();
    let count = (k as f64).powi(order as i32 - 1);
    if count > atom_cap as f64 {
        return Err(Error::SizeCap { what: "cylindrical atoms", size: count as usize, cap: atom_cap });
    }
    let mut atoms = Vec::with_capacity(count as usize);
    let mut tuple = vec![0usize; order - 1];
    loop {
        let pts: Vec<usize> = std::iter::once(s.base()).chain(tuple.iter().cloned()).collect();
        let g = (0..order * order).map(|t| s.d(pts[t / order], pts[t % order])).collect();
        let weight = tuple.iter().map(|&i| s.mass()[i]).product();
        atoms.push(CylAtom { g, weight });
        // odometer increment
        let mut p = order - 1;
        loop {
            if p == 0 {
                atoms.sort_by(lex);
                return Ok(CylMeasure { order, atoms });
            }
            p -= 1;
            tuple[p] += 1;
            if tuple[p] < k {
                break;
            }
            tuple[p] = 0;
        }
    }
}

/// `W_c` between the normalized cylindrical measures (ground metric: largest
/// entrywise difference of the matrices) plus `|log|` of the total-weight ratio.
///
/// A convergence diagnostic; no quantitative relation to the pointed distances is claimed.
pub fn cyl_discrepancy(a: &FinitePmmSpace, b: &FinitePmmSpace, order: usize, c: &ConcaveCost, atom_cap: usize) -> Result<f64> {
    let (ca, cb) = (cyl_pushforward(a, order, atom_cap)?, cyl_pushforward(b, order, atom_cap)?);
    let (ta, tb) = (ca.total_weight(), cb.total_weight());
    let (xa, xb) = (ca.merged(), cb.merged());
    let mu: Vec<f64> = xa.iter().map(|x| x.weight / ta).collect();
    let nu: Vec<f64> = xb.iter().map(|x| x.weight / tb).collect();
    let cost = DMatrix::from_fn(xa.len(), xb.len(), |i, j| {
        let linf = xa[i].g.iter().zip(&xb[j].g).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        c.eval(linf)
    });
    let (_, v) = optimal_coupling(&mu, &nu, &cost)?;
    Ok((ta / tb).ln().abs() + v.max(0.0))
}

/// Outcome of comparing cylindrical measures up to some order with the isomorphism search.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Smallest order at which the measures differ, if any.
    pub first_difference: Option<usize>,
    /// Largest order compared.
    pub checked_up_to: usize,
    pub iso: IsoOutcome,
}

impl Reconstruction {
    pub fn cyl_equal(&self) -> bool {
        self.first_difference.is_none()
    }
}

/// Compares `m^N` for `N = 2..=n_max` (stopping at the first difference) and
/// runs the isomorphism search.
pub fn reconstruction_test(
    a: &FinitePmmSpace,
    b: &FinitePmmSpace,
    n_max: usize,
    tol: f64,
    iso_cap: usize,
) -> Result<Reconstruction> {
    let mut first_difference = None;
    let mut checked_up_to = 1;
    for order in 2..=n_max {
        let (ca, cb) = (cyl_pushforward(a, order, DEFAULT_CYL_ATOM_CAP)?, cyl_pushforward(b, order, DEFAULT_CYL_ATOM_CAP)?);
        checked_up_to = order;
        if !ca.approx_eq(&cb, tol) {
            first_difference = Some(order);
            break;
        }
    }
    Ok(Reconstruction { first_difference, checked_up_to, iso: is_isomorphic(a, b, tol, iso_cap) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::DEFAULT_ISO_CAP;

    fn two_point(d: f64, a: f64, b: f64) -> FinitePmmSpace {
        FinitePmmSpace::from_rows(&[vec![0.0, d], vec![d, 0.0]], vec![a, b], 0).unwrap()
    }

    #[test]
    fn point_space_single_atom() {
        let c = cyl_pushforward(&FinitePmmSpace::point(2.5).unwrap(), 2, 100).unwrap();
        assert_eq!(c.atoms, vec![CylAtom { g: vec![0.0; 4], weight: 2.5 }]);
    }

    #[test]
    fn two_point_enumeration() {
        let c = cyl_pushforward(&two_point(1.0, 0.3, 0.7), 2, 100).unwrap();
        assert_eq!(
            c.atoms,
            vec![
                CylAtom { g: vec![0.0, 0.0, 0.0, 0.0], weight: 0.3 },
                CylAtom { g: vec![0.0, 1.0, 1.0, 0.0], weight: 0.7 },
            ]
        );
        let c3 = cyl_pushforward(&two_point(1.0, 0.3, 0.7), 3, 100).unwrap();
        assert_eq!(c3.atoms.len(), 4);
        assert!((c3.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relabeling_gives_identical_measure() {
        let s = FinitePmmSpace::from_rows(
            &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]],
            vec![0.2, 0.3, 0.5],
            1,
        )
        .unwrap();
        let r = s.relabel(&[2, 0, 1]).unwrap();
        for n in [2, 3] {
            assert_eq!(cyl_pushforward(&s, n, 100).unwrap(), cyl_pushforward(&r, n, 100).unwrap());
            assert_eq!(cyl_discrepancy(&s, &r, n, &ConcaveCost::min1(), 100).unwrap(), 0.0);
        }
    }

    #[test]
    fn discrepancy_of_scaled_pair() {
        // atom laws {0: ½, 1: ½} vs {0: ½, 2: ½}: optimal matching pays c(1) on half the mass
        let v = cyl_discrepancy(&two_point(1.0, 0.5, 0.5), &two_point(2.0, 0.5, 0.5), 2, &ConcaveCost::min1(), 100).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let s = FinitePmmSpace::from_points(&pts, vec![1.0; 10], 0).unwrap();
        assert!(matches!(cyl_pushforward(&s, 3, 50), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn reconstruction_examples() {
        let a = two_point(1.0, 0.5, 0.5);
        let r = reconstruction_test(&a, &a.relabel(&[1, 0]).unwrap(), 3, 1e-12, DEFAULT_ISO_CAP).unwrap();
        assert!(r.cyl_equal());
        assert_eq!(r.iso.is_isomorphic(), Some(true));
        let r = reconstruction_test(&a, &two_point(2.0, 0.5, 0.5), 3, 1e-12, DEFAULT_ISO_CAP).unwrap();
        assert_eq!(r.first_difference, Some(2));
        assert_eq!(r.iso.is_isomorphic(), Some(false));
    }
}
