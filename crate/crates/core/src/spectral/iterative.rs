//! Sparse eigensolver for large graphs: block inverse subspace iteration with
//! Rayleigh–Ritz on the symmetrized operator `S = M^{−1/2}(D − W)M^{−1/2}`,
//! with shifted systems solved by conjugate gradients.
//!
//! A block (rather than single-vector Krylov) method is used because model
//! graphs such as cycles have paired eigenvalues, which a single starting
//! vector cannot resolve.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LaplaceOperator, EIGEN_TOL};
use crate::error::{Error, Result};

const MAX_OUTER: usize = 500;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `(S + σ) x = b` to relative residual `tol`.
pub(crate) fn cg(op: &LaplaceOperator, sigma: f64, b: &[f64], x0: &[f64], tol: f64) -> Vec<f64> {
    let n = b.len();
    let apply = |v: &[f64]| -> Vec<f64> { op.apply_sym(v).iter().zip(v).map(|(a, x)| a + sigma * x).collect() };
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * tol * dot(b, b);
    for _ in 0..(20 * n).max(100) {
        if rr <= target {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

/// Modified Gram–Schmidt, twice.
fn orthonormalize(block: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for j in 0..block.len() {
            for i in 0..j {
                let c = dot(&block[i], &block[j]);
                let (head, tail) = block.split_at_mut(j);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= c * h;
                }
            }
            let norm = dot(&block[j], &block[j]).sqrt();
            block[j].iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// The `k` smallest eigenpairs of `S`, eigenvectors orthonormal in `ℓ²`.
pub(crate) fn smallest(op: &LaplaceOperator, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = op.n();
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let p = (k + 8).min(n);
    let scale = op.norm_bound().max(1.0);
    let sigma = 1e-6 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    orthonormalize(&mut block);
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        let mut next: Vec<Vec<f64>> = block.iter().map(|b| cg(op, sigma, b, b, 1e-12)).collect();
        orthonormalize(&mut next);
        let images: Vec<Vec<f64>> = next.iter().map(|v| op.apply_sym(v)).collect();
        let h = DMatrix::from_fn(p, p, |a, b| 0.5 * (dot(&next[a], &images[b]) + dot(&next[b], &images[a])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz: Vec<Vec<f64>> = order
            .iter()
            .map(|&c| (0..n).map(|i| (0..p).map(|l| eig.eigenvectors[(l, c)] * next[l][i]).sum()).collect())
            .collect();
        let vals: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        worst = 0.0;
        for j in 0..k {
            let sv = op.apply_sym(&ritz[j]);
            let r: f64 = sv.iter().zip(&ritz[j]).map(|(a, b)| (a - vals[j] * b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        block = ritz;
        if worst <= 0.1 * EIGEN_TOL * scale {
            return Ok((vals[..k].to_vec(), block[..k].to_vec()));
        }
    }
    Err(Error::NoConvergence { solver: "subspace iteration", residual: worst })
}
