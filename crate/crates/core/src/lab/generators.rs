//! Model spaces with fixed discretization conventions: uniform grids including
//! endpoints, trapezoid (cell-volume) Lebesgue weights, atoms snapped to the
//! nearest grid point (lower one on ties).

use nalgebra::DMatrix;

use crate::entropyflow::GraphDirichlet;
use crate::error::{invalid, Result};
use crate::space::FinitePmmSpace;

/// Trapezoid weights of Lebesgue measure for `k + 1` grid points with pitch `h`.
fn trapezoid(k: usize, h: f64) -> Vec<f64> {
    (0..=k)
        .map(|i| if k == 0 { 0.0 } else if i == 0 || i == k { 0.5 * h } else { h })
        .collect()
}

/// `[0,1]` with `(1/n)·Leb + (1 − 1/n)·δ_{1/2}`, pointed at the atom, on the grid of pitch `1/n`.
pub fn gen_interval_with_atom(n: usize) -> Result<FinitePmmSpace> {
    if n < 2 {
        return invalid("interval_with_atom needs n >= 2");
    }
    let h = 1.0 / n as f64;
    let pts: Vec<Vec<f64>> = (0..=n).map(|i| vec![i as f64 * h]).collect();
    let mut mass: Vec<f64> = trapezoid(n, h).into_iter().map(|w| w / n as f64).collect();
    let atom = n / 2;
    mass[atom] += 1.0 - 1.0 / n as f64;
    FinitePmmSpace::from_points(&pts, mass, atom)
}

/// `[0, 1 − 1/n] ∪ [2, 2 + 1/n]` with Lebesgue measure on the grid of pitch `1/(4n)`, pointed at 0.
pub fn gen_split_interval(n: usize) -> Result<FinitePmmSpace> {
    if n < 2 {
        return invalid("split_interval needs n >= 2");
    }
    let h = 1.0 / (4 * n) as f64;
    let left = 4 * n - 4;
    let right = 4;
    let mut pts: Vec<Vec<f64>> = (0..=left).map(|i| vec![i as f64 * h]).collect();
    pts.extend((0..=right).map(|i| vec![2.0 + i as f64 * h]));
    let mut mass = trapezoid(left, h);
    mass.extend(trapezoid(right, h));
    FinitePmmSpace::from_points(&pts, mass, 0)
}

/// `[0, 1]` with Lebesgue measure on the grid of pitch `h = 1/k`, pointed at 0.
pub fn gen_unit_interval(k: usize) -> Result<FinitePmmSpace> {
    if k < 1 {
        return invalid("unit interval needs at least one cell");
    }
    let h = 1.0 / k as f64;
    let pts: Vec<Vec<f64>> = (0..=k).map(|i| vec![i as f64 * h]).collect();
    FinitePmmSpace::from_points(&pts, trapezoid(k, h), 0)
}

/// Circle of unit circumference with `n` equally spaced points, uniform mass
/// summing to `total_mass`, arc-length metric, pointed at 0, and its
/// nearest-neighbour graph (`w = m_i / h²`), for which `E(f) → ½∫|f′|²` and the
/// Laplacian eigenvalues `2n²(1 − cos 2πk/n)` tend to `(2πk)²`.
pub fn gen_circle(n: usize, total_mass: f64) -> Result<(FinitePmmSpace, GraphDirichlet)> {
    if n < 3 {
        return invalid("circle needs n >= 3");
    }
    if !(total_mass > 0.0 && total_mass.is_finite()) {
        return invalid("total mass must be positive");
    }
    let h = 1.0 / n as f64;
    let dist = DMatrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        k.min(n - k) as f64 * h
    });
    let space = FinitePmmSpace::new(dist, vec![total_mass * h; n], 0)?;
    let graph = GraphDirichlet::eps_graph(&space, h, 1.0)?;
    Ok((space, graph))
}

/// Arc-length distances between the `n_a`- and `n_b`-point grids of the unit
/// circle, both starting at angle 0.
pub fn circle_cross_dist(n_a: usize, n_b: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n_a, n_b, |i, j| {
        let t = (i as f64 / n_a as f64 - j as f64 / n_b as f64).abs();
        t.min(1.0 - t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{doubling_constant, validate};

    #[test]
    fn interval_with_atom() {
        let s = gen_interval_with_atom(2).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.base(), 1);
        assert!((s.mass()[1] - (0.5 + 0.5 * 0.5)).abs() < 1e-15);
        for n in [2, 5, 8, 33] {
            let s = gen_interval_with_atom(n).unwrap();
            assert!((s.total_mass() - 1.0).abs() < 1e-12);
            assert!(validate(&s).is_valid());
        }
        assert!(gen_interval_with_atom(1).is_err());
    }

    #[test]
    fn split_interval() {
        for n in [2, 4, 8, 16] {
            let s = gen_split_interval(n).unwrap();
            assert!(s.diameter() >= 2.0);
            let right: f64 = (0..s.n()).filter(|&i| s.d(0, i) >= 2.0).map(|i| s.mass()[i]).sum();
            assert!((right - 1.0 / n as f64).abs() < 1e-12);
            let gap = (0..s.n()).filter(|&i| s.d(0, i) < 2.0).map(|i| s.d(0, i)).fold(0.0, f64::max);
            assert!(2.0 - gap >= 1.0);
            assert!(validate(&s).is_valid());
        }
    }

    #[test]
    fn circle() {
        let (s, g) = gen_circle(16, 2.0).unwrap();
        assert!((s.d(3, 11) - 0.5).abs() < 1e-15);
        assert!((s.total_mass() - 2.0).abs() < 1e-12);
        assert!(validate(&s).is_valid());
        assert_eq!(g.edges().len(), 16);
        for &(_, _, w) in g.edges() {
            assert!((w - 2.0 * 16.0).abs() < 1e-9);
        }
        let radii: Vec<f64> = (1..8).map(|k| k as f64 / 16.0).collect();
        assert!(doubling_constant(&s, &radii) <= 3.0);
        let x = circle_cross_dist(4, 8);
        assert_eq!(x[(1, 2)], 0.0);
        assert!((x[(0, 7)] - 0.125).abs() < 1e-15);
    }
}
