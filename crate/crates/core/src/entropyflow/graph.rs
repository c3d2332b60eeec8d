//! Graph Dirichlet forms `E(f) = ½ Σ_{edges} w_ij (f_i − f_j)²`.
//!
//! On a finite metric space every absolutely continuous curve is constant, so
//! the weak-upper-gradient energy degenerates; a weighted neighbourhood graph
//! stands in for it. The ε-graph weights are calibrated so that `E` recovers
//! `½ ∫ |∇f|² dm` on refining grids of model spaces.

use crate::error::{invalid, Result};
use crate::space::FinitePmmSpace;

/// Where the edge weights came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphProvenance {
    EpsGraph { eps: f64, dim: f64 },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDirichlet {
    node_mass: Vec<f64>,
    /// `(i, j, w)` with `i < j`, each unordered pair at most once.
    edges: Vec<(usize, usize, f64)>,
    provenance: GraphProvenance,
}

impl GraphDirichlet {
    /// Merges duplicate pairs and rejects self-loops, negative weights and bad indices.
    pub fn new(node_mass: Vec<f64>, edges: Vec<(usize, usize, f64)>, provenance: GraphProvenance) -> Result<Self> {
        let n = node_mass.len();
        if node_mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return invalid("node masses must be finite and nonnegative");
        }
        let mut norm = Vec::with_capacity(edges.len());
        for (i, j, w) in edges {
            if i == j {
                return invalid(format!("self-loop at node {i}"));
            }
            if i >= n || j >= n {
                return invalid(format!("edge ({i}, {j}) out of range for {n} nodes"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return invalid(format!("edge ({i}, {j}) has weight {w}"));
            }
            norm.push((i.min(j), i.max(j), w));
        }
        norm.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(norm.len());
        for e in norm {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        Ok(Self { node_mass, edges: merged, provenance })
    }

    /// ε-neighbourhood graph of `space` with
    /// `w_ij = m_i m_j · 4·dim / (S_i + S_j)` for `0 < d_ij ≤ ε`, where
    /// `S_i = Σ_{0 < d_ij ≤ ε} m_j d_ij²` is the local second moment.
    ///
    /// On a uniform 1-D grid of pitch `h` with `ε = h` this gives `w = m/h²`.
    pub fn eps_graph(space: &FinitePmmSpace, eps: f64, dim: f64) -> Result<Self> {
        if !(eps > 0.0) || !(dim > 0.0) {
            return invalid("eps and dim must be positive");
        }
        let n = space.n();
        let m = space.mass();
        let tol = eps * (1.0 + 1e-9);
        let near = |i: usize, j: usize| {
            let d = space.d(i, j);
            d > 0.0 && d <= tol
        };
        let s: Vec<f64> = (0..n)
            .map(|i| (0..n).filter(|&j| near(i, j)).map(|j| m[j] * space.d(i, j).powi(2)).sum())
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if near(i, j) && m[i] > 0.0 && m[j] > 0.0 {
                    edges.push((i, j, m[i] * m[j] * 4.0 * dim / (s[i] + s[j])));
                }
            }
        }
        Self::new(m.to_vec(), edges, GraphProvenance::EpsGraph { eps, dim })
    }

    pub fn n(&self) -> usize {
        self.node_mass.len()
    }

    pub fn node_mass(&self) -> &[f64] {
        &self.node_mass
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn provenance(&self) -> GraphProvenance {
        self.provenance
    }

    /// `½ Σ w_ij (f_i − f_j)²`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        0.5 * self.edges.iter().map(|&(i, j, w)| w * (f[i] - f[j]).powi(2)).sum::<f64>()
    }

    /// Connected components of the positive-weight graph restricted to nodes with positive mass.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let nx = p[y];
                p[y] = r;
                y = nx;
            }
            r
        }
        for &(i, j, w) in &self.edges {
            if w > 0.0 && self.node_mass[i] > 0.0 && self.node_mass[j] > 0.0 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; n];
        for x in (0..n).filter(|&x| self.node_mass[x] > 0.0) {
            let r = find(&mut parent, x);
            if index[r] == usize::MAX {
                index[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[index[r]].push(x);
        }
        groups
    }

    /// Whether the support is connected. A disconnected graph is accepted but
    /// its Laplacian has a multiple zero eigenvalue.
    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_weights_are_mass_over_pitch_squared() {
        let n = 10;
        let h = 0.1;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * h]).collect();
        let s = FinitePmmSpace::from_points(&pts, vec![h; n], 0).unwrap();
        let g = GraphDirichlet::eps_graph(&s, h, 1.0).unwrap();
        // interior edges (both endpoints have two neighbours)
        for &(i, j, w) in g.edges() {
            assert_eq!(j, i + 1);
            if i > 0 && j < n - 1 {
                assert!((w - h / (h * h)).abs() < 1e-9);
            }
        }
        assert!(g.is_connected());
    }

    #[test]
    fn validation_and_merging() {
        assert!(GraphDirichlet::new(vec![1.0; 2], vec![(0, 0, 1.0)], GraphProvenance::Explicit).is_err());
        assert!(GraphDirichlet::new(vec![1.0; 2], vec![(0, 2, 1.0)], GraphProvenance::Explicit).is_err());
        assert!(GraphDirichlet::new(vec![1.0; 2], vec![(0, 1, -1.0)], GraphProvenance::Explicit).is_err());
        let g = GraphDirichlet::new(vec![1.0; 3], vec![(1, 0, 1.0), (0, 1, 2.0)], GraphProvenance::Explicit).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 3.0)]);
        assert_eq!(g.components(), vec![vec![0, 1], vec![2]]);
        assert!(!g.is_connected());
    }

    #[test]
    fn energy_single_edge() {
        let g = GraphDirichlet::new(vec![1.0; 2], vec![(0, 1, 2.0)], GraphProvenance::Explicit).unwrap();
        assert_eq!(g.energy(&[3.0, 1.0]), 4.0);
    }
}
