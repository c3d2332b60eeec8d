//! Transportation simplex on the bipartite supply/demand graph.
//!
//! The basis is a spanning tree over row and column nodes. Supplies are
//! perturbed by a tiny amount so every basic solution is nondegenerate, which
//! rules out cycling; the final flows are recomputed from the unperturbed
//! marginals on the optimal tree.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

struct Tree {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
}

impl Tree {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    /// Dual potentials with `u_0 = 0`.
    fn potentials(&self, adj: &[Vec<(usize, usize)>], cost: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut stack = vec![0];
        while let Some(x) = stack.pop() {
            for &(y, k) in &adj[x] {
                if pot[y].is_nan() {
                    let (i, j) = self.cells[k];
                    pot[y] = cost[(i, j)] - pot[x];
                    stack.push(y);
                }
            }
        }
        (pot[..m].to_vec(), pot[m..].to_vec())
    }

    /// Cells on the tree path from node `from` to node `to`, in order.
    fn path(&self, adj: &[Vec<(usize, usize)>], from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![(usize::MAX, usize::MAX); self.m + self.n];
        parent[from] = (from, usize::MAX);
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                break;
            }
            for &(y, k) in &adj[x] {
                if parent[y].0 == usize::MAX {
                    parent[y] = (x, k);
                    stack.push(y);
                }
            }
        }
        let mut cells = Vec::new();
        let mut x = to;
        while x != from {
            let (p, k) = parent[x];
            cells.push(k);
            x = p;
        }
        cells.reverse();
        cells
    }

    /// Flows determined by the tree and the marginals (leaf elimination).
    fn solve_flows(&mut self, a: &[f64], b: &[f64]) {
        let (m, n) = (self.m, self.n);
        let mut rem: Vec<f64> = a.iter().chain(b).cloned().collect();
        let mut deg = vec![0usize; m + n];
        let adj = self.adjacency();
        for (x, l) in adj.iter().enumerate() {
            deg[x] = l.len();
        }
        let mut done = vec![false; self.cells.len()];
        let mut leaves: Vec<usize> = (0..m + n).filter(|&x| deg[x] == 1).collect();
        while let Some(x) = leaves.pop() {
            if deg[x] != 1 {
                continue;
            }
            let Some(&(y, k)) = adj[x].iter().find(|(_, k)| !done[*k]) else { continue };
            let f = rem[x];
            self.flow[k] = f;
            done[k] = true;
            rem[x] = 0.0;
            rem[y] -= f;
            deg[x] = 0;
            deg[y] -= 1;
            if deg[y] == 1 {
                leaves.push(y);
            }
        }
    }
}

/// Solves `min ⟨γ, cost⟩` over nonnegative `γ` with row sums `a` and column sums `b`.
/// Inputs must be strictly positive with equal totals.
pub(crate) fn solve(a: &[f64], b: &[f64], cost: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.len(), b.len());
    let total: f64 = a.iter().sum();
    let delta = 1e-11 * total / (m as f64 + 1.0);
    let ap: Vec<f64> = a.iter().map(|x| x + delta).collect();
    let mut bp = b.to_vec();
    bp[n - 1] += delta * m as f64;

    // north-west corner start
    let mut tree = Tree { m, n, cells: Vec::with_capacity(m + n - 1), flow: Vec::with_capacity(m + n - 1) };
    let (mut s, mut d) = (ap.clone(), bp.clone());
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]);
        tree.cells.push((i, j));
        tree.flow.push(x);
        s[i] -= x;
        d[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (s[i] <= d[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let max_iter = 50 * (m + n) * (m + n) + 1000;
    let mut adj = tree.adjacency();
    for _ in 0..max_iter {
        let (u, v) = tree.potentials(&adj, cost);
        let mut best = (-tol, usize::MAX, usize::MAX);
        for i in 0..m {
            for j in 0..n {
                let r = cost[(i, j)] - u[i] - v[j];
                if r < best.0 {
                    best = (r, i, j);
                }
            }
        }
        if best.1 == usize::MAX {
            tree.solve_flows(a, b);
            let mut plan = DMatrix::zeros(m, n);
            for (k, &(i, j)) in tree.cells.iter().enumerate() {
                plan[(i, j)] = tree.flow[k].max(0.0);
            }
            return Ok(plan);
        }
        let (_, p, q) = best;
        // Cycle: entering cell (p,q) then the tree path from column q back to row p.
        let path = tree.path(&adj, m + q, p);
        // Path cells alternate: first leaves column q (minus), then plus, ...
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (t, &k) in path.iter().enumerate() {
            if t % 2 == 0 && tree.flow[k] < theta {
                theta = tree.flow[k];
                leave = k;
            }
        }
        for (t, &k) in path.iter().enumerate() {
            if t % 2 == 0 {
                tree.flow[k] -= theta;
            } else {
                tree.flow[k] += theta;
            }
        }
        tree.cells[leave] = (p, q);
        tree.flow[leave] = theta;
        adj = tree.adjacency();
    }
    Err(Error::NoConvergence { solver: "transportation simplex", residual: f64::NAN })
}
