//! Pointed measured Gromov–Hausdorff brackets for finite spaces.
//!
//! Finite spaces are bounded, so balls around the basepoints are taken large
//! enough to contain both spaces. For a map `f: X → Y` with `f(x̄) = ȳ` let
//! `ε(f)` be the largest of its distortion, the covering radius of `f(X)` in
//! `Y`, and the largest gap `|∫φ d(f_♯m_X) − ∫φ dm_Y|` over the test functions
//! `φ ≡ 1` and the tents `φ_z = (1 − d(·, z))⁺`, `z ∈ Y`. The bracket encloses
//! `min_f ε(f)`. Unlike the Gromov-type distances, every point counts, not
//! only the support of the measure.

use crate::error::{invalid, Result};
use crate::space::FinitePmmSpace;

/// Largest `|X|·|Y|` for which the greedy map is improved by local search.
pub const PMGH_SEARCH_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct PmghReport {
    pub lower: f64,
    pub lower_method: &'static str,
    pub upper: f64,
    /// Map achieving `upper`, `map[x] = f(x)`.
    pub map: Vec<usize>,
    /// Whether local search ran (otherwise the upper bound is greedy only).
    pub local_search: bool,
    /// For each grid value: known feasible, known infeasible, or undecided.
    pub grid: Vec<(f64, Option<bool>)>,
}

impl PmghReport {
    /// Smallest grid value certified feasible.
    pub fn smallest_feasible(&self) -> Option<f64> {
        self.grid.iter().filter(|(_, s)| *s == Some(true)).map(|(e, _)| *e).reduce(f64::min)
    }
}

/// Map-independent lower bounds: every `x` needs an image at matching base
/// distance within `ε`, every `y` a preimage within `2ε`; diameters differ by
/// at most `ε` one way and `3ε` the other.
fn lower_bound(a: &FinitePmmSpace, b: &FinitePmmSpace) -> (f64, &'static str) {
    let ra = a.base_distances();
    let rb = b.base_distances();
    let nearest = |r: f64, set: &[f64]| set.iter().map(|s| (r - s).abs()).fold(f64::INFINITY, f64::min);
    let forward = ra.iter().map(|&r| nearest(r, &rb)).fold(0.0, f64::max);
    let backward = 0.5 * rb.iter().map(|&r| nearest(r, &ra)).fold(0.0, f64::max);
    let (da, db) = (a.diameter(), b.diameter());
    let cands = [
        (forward, "base-distance profile"),
        (backward, "base-distance profile (covering)"),
        (da - db, "diameter"),
        ((db - da) / 3.0, "diameter (covering)"),
    ];
    cands.into_iter().fold((0.0, "trivial"), |best, c| if c.0 > best.0 { c } else { best })
}

fn epsilon(a: &FinitePmmSpace, b: &FinitePmmSpace, f: &[usize]) -> f64 {
    let (na, nb) = (a.n(), b.n());
    let mut worst: f64 = 0.0;
    for x in 0..na {
        for y in (x + 1)..na {
            worst = worst.max((a.d(x, y) - b.d(f[x], f[y])).abs());
        }
    }
    for y in 0..nb {
        worst = worst.max(f.iter().map(|&fx| b.d(y, fx)).fold(f64::INFINITY, f64::min));
    }
    let mut push = vec![0.0; nb];
    for x in 0..na {
        push[f[x]] += a.mass()[x];
    }
    let diff: Vec<f64> = push.iter().zip(b.mass()).map(|(p, m)| p - m).collect();
    worst = worst.max(diff.iter().sum::<f64>().abs());
    for z in 0..nb {
        let g: f64 = (0..nb).map(|y| (1.0 - b.d(y, z)).max(0.0) * diff[y]).sum();
        worst = worst.max(g.abs());
    }
    worst
}

/// Places points in order of distance from the base, each at the target
/// minimizing the distortion against those already placed.
fn greedy(a: &FinitePmmSpace, b: &FinitePmmSpace) -> Vec<usize> {
    let ra = a.base_distances();
    let rb = b.base_distances();
    let mut order: Vec<usize> = (0..a.n()).collect();
    order.sort_by(|&x, &y| ra[x].total_cmp(&ra[y]).then(x.cmp(&y)));
    let mut f = vec![usize::MAX; a.n()];
    let mut placed: Vec<usize> = Vec::new();
    for x in order {
        let y = if x == a.base() {
            b.base()
        } else {
            let key = |y: usize| {
                let dist = placed.iter().map(|&p| (a.d(x, p) - b.d(y, f[p])).abs()).fold(0.0, f64::max);
                (dist, (ra[x] - rb[y]).abs(), (a.mass()[x] - b.mass()[y]).abs(), x.abs_diff(y))
            };
            (0..b.n())
                .min_by(|&p, &q| {
                    let (kp, kq) = (key(p), key(q));
                    kp.0.total_cmp(&kq.0).then(kp.1.total_cmp(&kq.1)).then(kp.2.total_cmp(&kq.2)).then(kp.3.cmp(&kq.3))
                })
                .unwrap()
        };
        f[x] = y;
        placed.push(x);
    }
    f
}

/// Each point to the target with the closest base distance.
fn profile_map(a: &FinitePmmSpace, b: &FinitePmmSpace) -> Vec<usize> {
    let ra = a.base_distances();
    let rb = b.base_distances();
    (0..a.n())
        .map(|x| {
            if x == a.base() {
                return b.base();
            }
            (0..b.n()).min_by(|&p, &q| (ra[x] - rb[p]).abs().total_cmp(&(ra[x] - rb[q]).abs())).unwrap()
        })
        .collect()
}

/// Brackets the pmGH-type `ε` between `a` and `b` and classifies `eps_grid`.
pub fn pmgh_compare(a: &FinitePmmSpace, b: &FinitePmmSpace, eps_grid: &[f64]) -> Result<PmghReport> {
    if eps_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return invalid("eps grid values must be finite and nonnegative");
    }
    let (lower, lower_method) = lower_bound(a, b);
    let mut best = greedy(a, b);
    let mut upper = epsilon(a, b, &best);
    let alt = profile_map(a, b);
    let e = epsilon(a, b, &alt);
    if e < upper {
        upper = e;
        best = alt;
    }
    let local_search = a.n() * b.n() <= PMGH_SEARCH_CAP;
    if local_search {
        for _ in 0..50 {
            if upper <= lower {
                break;
            }
            let mut improved = false;
            for x in (0..a.n()).filter(|&x| x != a.base()) {
                let keep = best[x];
                for y in 0..b.n() {
                    if y == keep {
                        continue;
                    }
                    best[x] = y;
                    let e = epsilon(a, b, &best);
                    if e < upper - 1e-15 {
                        upper = e;
                        improved = true;
                        break;
                    }
                    best[x] = keep;
                }
            }
            if !improved {
                break;
            }
        }
    }
    let upper = upper.max(lower);
    let grid = eps_grid
        .iter()
        .map(|&e| (e, if e >= upper { Some(true) } else if e < lower { Some(false) } else { None }))
        .collect();
    Ok(PmghReport { lower, lower_method, upper, map: best, local_search, grid })
}
