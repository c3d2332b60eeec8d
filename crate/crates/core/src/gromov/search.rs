//! Upper bounds for embedding infima by alternating transport and gluing.
//!
//! The objective for a cross matrix `X` is `X(x̄_a, x̄_b) + T(X)` where `T` is
//! either `W₂` or `W_c` computed with ground cost from `X`. For a fixed
//! coupling the best relation-gluing is re-fitted; for a fixed gluing the
//! coupling is re-solved exactly. In exact mode the concave-cost objective is
//! additionally refined by majorize-minimize steps: the cost is linearized at
//! the current `X` and the resulting linear program over all admissible cross
//! matrices is solved; by concavity each step cannot increase the objective.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::glue::{coupling_support, glue_by_relation};
use crate::error::{Error, Result};
use crate::space::FinitePmmSpace;
use crate::transport::{optimal_coupling, ConcaveCost, Coupling};

/// Multi-start configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Number of starts, including the structural ones (wedge, profile, product).
    pub multistarts: usize,
    /// Maximum alternation rounds per start.
    pub rounds: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { multistarts: 8, rounds: 20, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Fit {
    Quadratic,
    Concave(ConcaveCost),
}

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub value: f64,
    pub cross: DMatrix<f64>,
}

pub(crate) struct Embedding<'a> {
    pub a: &'a FinitePmmSpace,
    pub b: &'a FinitePmmSpace,
    pub mu: &'a [f64],
    pub nu: &'a [f64],
    pub fit: Fit,
}

impl Embedding<'_> {
    fn evaluate(&self, cross: &DMatrix<f64>) -> Result<(f64, Coupling)> {
        let base = cross[(self.a.base(), self.b.base())];
        match &self.fit {
            Fit::Quadratic => {
                let (g, v) = optimal_coupling(self.mu, self.nu, &cross.map(|x| x * x))?;
                Ok((base + v.max(0.0).sqrt(), g))
            }
            Fit::Concave(c) => {
                let (g, v) = optimal_coupling(self.mu, self.nu, &c.matrix(cross))?;
                Ok((base + v.max(0.0), g))
            }
        }
    }

    fn scale(&self) -> f64 {
        self.a.diameter().max(self.b.diameter())
    }

    /// Relation variants extracted from a coupling: full support plus
    /// mass-greedy prunings at several distortion thresholds.
    fn relations(&self, g: &Coupling) -> Vec<Vec<(usize, usize)>> {
        let mut pairs = coupling_support(g);
        pairs.sort_by(|p, q| g.plan[(q.0, q.1)].total_cmp(&g.plan[(p.0, p.1)]).then(p.cmp(q)));
        let scale = self.scale();
        let bb = (self.a.base(), self.b.base());
        let mut out = vec![pairs.clone()];
        for theta in [1e-12 * scale.max(1e-300), 0.05 * scale, 0.25 * scale] {
            for with_base in [true, false] {
                let mut kept: Vec<(usize, usize)> = if with_base { vec![bb] } else { Vec::new() };
                for &(p, q) in &pairs {
                    let ok = kept
                        .iter()
                        .all(|&(r, s)| (self.a.d(p, r) - self.b.d(q, s)).abs() <= theta);
                    if ok && !kept.contains(&(p, q)) {
                        kept.push((p, q));
                    }
                }
                out.push(kept);
            }
        }
        for r in &mut out {
            r.sort_unstable();
            r.dedup();
        }
        out.sort();
        out.dedup();
        out
    }

    fn glue_eval(&self, rel: &[(usize, usize)]) -> Result<(f64, DMatrix<f64>, Coupling)> {
        let g = glue_by_relation(self.a, self.b, rel);
        let (v, c) = self.evaluate(&g.cross)?;
        Ok((v, g.cross, c))
    }

    /// Alternation from one starting relation set.
    fn descend(&self, starts: Vec<Vec<(usize, usize)>>, rounds: usize) -> Result<(f64, DMatrix<f64>, Coupling)> {
        let mut best: Option<(f64, DMatrix<f64>, Coupling)> = None;
        for rel in starts {
            let cand = self.glue_eval(&rel)?;
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
        let mut best = best.expect("at least one start");
        for _ in 0..rounds {
            let mut improved = false;
            for rel in self.relations(&best.2) {
                let cand = self.glue_eval(&rel)?;
                if cand.0 < best.0 - 1e-13 * (1.0 + best.0) {
                    best = cand;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        Ok(best)
    }

    /// Majorize-minimize refinement over the full cross-metric polytope.
    fn refine_lp(&self, start: (f64, DMatrix<f64>, Coupling), rounds: usize) -> Result<(f64, DMatrix<f64>)> {
        let Fit::Concave(c) = &self.fit else {
            return Ok((start.0, start.1));
        };
        let (mut value, mut cross, mut coupling) = start;
        for _ in 0..rounds {
            let slopes = cross.map(|x| right_slope(c, x));
            let next = cross_lp(self.a, self.b, &coupling.plan, &slopes)?;
            let (v, g) = self.evaluate(&next)?;
            if v < value - 1e-13 * (1.0 + value) {
                value = v;
                cross = next;
                coupling = g;
            } else {
                break;
            }
        }
        Ok((value, cross))
    }
}

fn right_slope(c: &ConcaveCost, x: f64) -> f64 {
    let h = 1e-7 * (1.0 + x);
    ((c.eval(x + h) - c.eval(x)) / h).max(0.0)
}

/// Minimizes `X(x̄_a, x̄_b) + Σ γ_ij s_ij X_ij` over admissible cross matrices.
pub(crate) fn cross_lp(
    a: &FinitePmmSpace,
    b: &FinitePmmSpace,
    plan: &DMatrix<f64>,
    slopes: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let (n1, n2) = (a.n(), b.n());
    let ub = a.diameter() + b.diameter() + 1.0;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let mut obj = plan[(i, j)] * slopes[(i, j)];
            if (i, j) == (a.base(), b.base()) {
                obj += 1.0;
            }
            vars.push(p.add_var(obj, (0.0, ub)));
        }
    }
    let v = |i: usize, j: usize| vars[i * n2 + j];
    for j in 0..n2 {
        for i in 0..n1 {
            for k in 0..n1 {
                if i == k {
                    continue;
                }
                // X(i,j) - X(k,j) <= d_a(i,k)
                p.add_constraint([(v(i, j), 1.0), (v(k, j), -1.0)], ComparisonOp::Le, a.d(i, k));
                if i < k {
                    p.add_constraint([(v(i, j), 1.0), (v(k, j), 1.0)], ComparisonOp::Ge, a.d(i, k));
                }
            }
        }
    }
    for i in 0..n1 {
        for j in 0..n2 {
            for l in 0..n2 {
                if j == l {
                    continue;
                }
                p.add_constraint([(v(i, j), 1.0), (v(i, l), -1.0)], ComparisonOp::Le, b.d(j, l));
                if j < l {
                    p.add_constraint([(v(i, j), 1.0), (v(i, l), 1.0)], ComparisonOp::Ge, b.d(j, l));
                }
            }
        }
    }
    let out = p.solve().map_err(|e| Error::Lp(format!("{e:?}")))?;
    let sol = out.solution().ok_or_else(|| Error::Lp("no solution".into()))?;
    Ok(DMatrix::from_fn(n1, n2, |i, j| sol.var_value(v(i, j)).clamp(0.0, ub)))
}

/// All nonempty partial matchings between index sets of sizes `n1`, `n2`.
fn partial_matchings(n1: usize, n2: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(i: usize, n1: usize, n2: usize, used: &mut Vec<bool>, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == n1 {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            return;
        }
        rec(i + 1, n1, n2, used, cur, out);
        for j in 0..n2 {
            if !used[j] {
                used[j] = true;
                cur.push((i, j));
                rec(i + 1, n1, n2, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n1, n2, &mut vec![false; n2], &mut Vec::new(), &mut out);
    out
}

/// Best cross matrix found by the multi-start search.
///
/// `floor` is a certified lower bound on the objective; the search stops as
/// soon as a start attains it.
pub(crate) fn search(prob: &Embedding<'_>, cfg: &SearchConfig, exact: bool, floor: f64) -> Result<Candidate> {
    let (a, b) = (prob.a, prob.b);
    let bb = (a.base(), b.base());
    let ra = a.base_distances();
    let rb = b.base_distances();

    let mut starts: Vec<Vec<Vec<(usize, usize)>>> = Vec::new();
    starts.push(vec![vec![bb]]);
    let profile_cost = DMatrix::from_fn(a.n(), b.n(), |i, j| (ra[i] - rb[j]).abs());
    let (pg, _) = optimal_coupling(prob.mu, prob.nu, &profile_cost)?;
    starts.push(prob.relations(&pg));
    starts.push(prob.relations(&Coupling::product(prob.mu, prob.nu)));
    let random = cfg.multistarts.saturating_sub(starts.len()).max(1);
    for s in 0..random {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(s as u64));
        let cost = DMatrix::from_fn(a.n(), b.n(), |_, _| rng.random::<f64>());
        let (g, _) = optimal_coupling(prob.mu, prob.nu, &cost)?;
        starts.push(prob.relations(&g));
    }
    if exact {
        starts.extend(partial_matchings(a.n(), b.n()).into_iter().map(|r| vec![r]));
    }

    let run = |st: Vec<Vec<(usize, usize)>>| -> Result<(f64, DMatrix<f64>)> {
        let d = prob.descend(st, cfg.rounds)?;
        if exact {
            prob.refine_lp(d, cfg.rounds)
        } else {
            Ok((d.0, d.1))
        }
    };
    let attained = |v: f64| v <= floor + 1e-12 * (1.0 + floor.abs());

    // structural starts first; they usually suffice
    let rest = starts.split_off(STRUCTURAL.min(starts.len()));
    let mut best: Option<Candidate> = None;
    for st in starts {
        let (value, cross) = run(st)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Candidate { value, cross });
        }
        if attained(value) {
            return Ok(checked(prob, best.unwrap()));
        }
    }
    let results: Vec<Result<(f64, DMatrix<f64>)>> = rest.into_par_iter().map(run).collect();
    for r in results {
        let (value, cross) = r?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(Candidate { value, cross });
        }
    }
    Ok(checked(prob, best.expect("nonempty start list")))
}

/// The reported value must be the objective of the returned cross matrix.
fn checked(prob: &Embedding<'_>, c: Candidate) -> Candidate {
    debug_assert!(prob
        .evaluate(&c.cross)
        .is_ok_and(|(v, _)| (v - c.value).abs() <= 1e-9 * (1.0 + v.abs())));
    c
}

/// Wedge, profile and product starts.
const STRUCTURAL: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matchings_are_counted() {
        // Σ_k C(3,k)² k! − 1 = 1 + 9 + 18 + 6 − 1
        assert_eq!(partial_matchings(3, 3).len(), 33);
        assert_eq!(partial_matchings(2, 1).len(), 2);
    }

    #[test]
    fn lp_respects_the_polytope() {
        let a = FinitePmmSpace::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.5, 0.5], 0).unwrap();
        let b = FinitePmmSpace::point(1.0).unwrap();
        let plan = DMatrix::from_column_slice(2, 1, &[0.5, 0.5]);
        let x = cross_lp(&a, &b, &plan, &DMatrix::from_element(2, 1, 1.0)).unwrap();
        // minimize x0 + 0.5 x0 + 0.5 x1 s.t. x0 + x1 ≥ 1, |x0 − x1| ≤ 1
        assert!((x[(0, 0)] - 0.0).abs() < 1e-9 && (x[(1, 0)] - 1.0).abs() < 1e-9);
    }
}
