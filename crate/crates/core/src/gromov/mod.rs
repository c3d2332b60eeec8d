//! Pointed Gromov-type distances between finite spaces.
//!
//! Embedding infima are taken over cross-distance matrices on the disjoint
//! union (see [`glue`](glue_by_relation) for why this is exact). Upper bounds
//! come from explicit gluings; lower bounds use the fact that any embedding
//! preserves distances to the basepoints.

mod cyl;
mod glue;
mod search;

pub use cyl::{cyl_discrepancy, cyl_pushforward, reconstruction_test, CylAtom, CylMeasure, Reconstruction, DEFAULT_CYL_ATOM_CAP};
pub use glue::{coupling_support, glue_by_coupling, glue_by_relation, GluedSpace};
pub use search::SearchConfig;

use nalgebra::DMatrix;
use rayon::prelude::*;

use search::{search, Embedding, Fit};
use crate::error::{Error, Result};
use crate::space::{cutoff_rescale, reweight, support_restrict, CutoffSpec, FinitePmmSpace, WeightSpec};
use crate::transport::{optimal_coupling, ConcaveCost};

/// Largest support handled by the exact small-instance mode.
pub const EXACT_TINY_CAP: usize = 4;

/// A two-sided estimate of a distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_method: String,
    pub upper_method: String,
}

impl DistanceBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// How each finite-mass term is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgwMode {
    /// Gluing search plus linear-programming refinement; supports of at most
    /// [`EXACT_TINY_CAP`] points.
    ExactTiny,
    /// Certified lower bound and gluing-search upper bound.
    Bracket,
}

/// Law of `d(·, x̄)` under `mu`, as `(radii, weights)`.
fn profile(space: &FinitePmmSpace, mu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (space.base_distances(), mu.to_vec())
}

fn profile_cost(ra: &[f64], rb: &[f64], f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(ra.len(), rb.len(), |i, j| f((ra[i] - rb[j]).abs()))
}

fn normalized(mass: &[f64]) -> Vec<f64> {
    let t: f64 = mass.iter().sum();
    mass.iter().map(|m| m / t).collect()
}

/// Orders a pair canonically so that results are exactly symmetric.
fn canonical<'a>(a: &'a FinitePmmSpace, b: &'a FinitePmmSpace) -> (&'a FinitePmmSpace, &'a FinitePmmSpace) {
    let key = |s: &FinitePmmSpace| {
        let mut k = vec![s.n() as f64, s.base() as f64];
        k.extend(s.mass());
        k.extend(s.dist().iter());
        k
    };
    let (ka, kb) = (key(a), key(b));
    let ord = ka
        .iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(ka.len().cmp(&kb.len()));
    if ord.is_gt() {
        (b, a)
    } else {
        (a, b)
    }
}

/// Certified lower bound for the weighted distance:
/// `|log(z_a/z_b)| + W₂(law of d(·,x̄_a) under m_{a,ψ}, law of d(·,x̄_b) under m_{b,ψ})`.
///
/// For any embedding, `|d(x, x̄_a) − d(y, x̄_b)| ≤ d(x, y) + d(x̄_a, x̄_b)`, so the
/// profile distance is at most `W₂ + d(x̄_a, x̄_b)` under the same coupling.
pub fn dpsi_lower(a: &FinitePmmSpace, b: &FinitePmmSpace, psi: &WeightSpec) -> Result<f64> {
    let (za, sa) = reweight(a, psi);
    let (zb, sb) = reweight(b, psi);
    let (ra, wa) = profile(&sa, sa.mass());
    let (rb, wb) = profile(&sb, sb.mass());
    let (_, v) = optimal_coupling(&wa, &wb, &profile_cost(&ra, &rb, |d| d * d))?;
    Ok((za / zb).ln().abs() + v.max(0.0).sqrt())
}

/// Upper bound for the weighted distance from the gluing search.
pub fn dpsi_upper(a: &FinitePmmSpace, b: &FinitePmmSpace, psi: &WeightSpec, cfg: &SearchConfig) -> Result<f64> {
    let (a, b) = canonical(a, b);
    let (za, sa) = reweight(a, psi);
    let (zb, sb) = reweight(b, psi);
    // ψ > 0, so the reweighted support is the original one
    let (sa, _) = support_restrict(&sa)?;
    let (sb, _) = support_restrict(&sb)?;
    let log = (za / zb).ln().abs();
    let floor = dpsi_lower(&sa, &sb, &WeightSpec::constant(1.0))?;
    let prob = Embedding { a: &sa, b: &sb, mu: sa.mass(), nu: sb.mass(), fit: Fit::Quadratic };
    let best = search(&prob, cfg, false, floor)?;
    Ok(log + best.value)
}

/// Both bounds of the weighted distance.
pub fn dpsi(a: &FinitePmmSpace, b: &FinitePmmSpace, psi: &WeightSpec, cfg: &SearchConfig) -> Result<DistanceBracket> {
    let lower = dpsi_lower(a, b, psi)?;
    let upper = dpsi_upper(a, b, psi, cfg)?.max(lower);
    Ok(DistanceBracket {
        lower,
        upper,
        lower_method: "log-ratio+W2(base-distance laws)".into(),
        upper_method: "gluing search".into(),
    })
}

/// Certified lower bound for the finite-mass distance:
/// `|log(m_a(X)/m_b(X))| + W_c(base-distance laws) / max(1, c'(0))`.
///
/// `c` is subadditive and `c(t) ≤ c'(0) t`, so `c(|r − s|) ≤ c(d(x,y)) + c'(0) d(x̄_a, x̄_b)`.
pub fn pgw_fm_lower(a: &FinitePmmSpace, b: &FinitePmmSpace, c: &ConcaveCost) -> Result<f64> {
    let (ma, mb) = (a.total_mass(), b.total_mass());
    let (ra, wa) = profile(a, &normalized(a.mass()));
    let (rb, wb) = profile(b, &normalized(b.mass()));
    let (_, v) = optimal_coupling(&wa, &wb, &profile_cost(&ra, &rb, |d| c.eval(d)))?;
    Ok((ma / mb).ln().abs() + v.max(0.0) / c.slope0().max(1.0))
}

/// Finite-mass pointed distance
/// `|log(m_a(X_a)/m_b(X_b))| + inf [d(x̄_a, x̄_b) + W_c(normalized measures)]`.
pub fn pgw_fm(
    a: &FinitePmmSpace,
    b: &FinitePmmSpace,
    mode: PgwMode,
    c: &ConcaveCost,
    cfg: &SearchConfig,
) -> Result<DistanceBracket> {
    let (a, b) = canonical(a, b);
    let (sa, _) = support_restrict(a)?;
    let (sb, _) = support_restrict(b)?;
    let exact = mode == PgwMode::ExactTiny;
    if exact {
        for s in [&sa, &sb] {
            if s.n() > EXACT_TINY_CAP {
                return Err(Error::SizeCap { what: "exact-tiny support", size: s.n(), cap: EXACT_TINY_CAP });
            }
        }
    }
    let lower = pgw_fm_lower(&sa, &sb, c)?;
    let log = (sa.total_mass() / sb.total_mass()).ln().abs();
    let mu = normalized(sa.mass());
    let nu = normalized(sb.mass());
    let prob = Embedding { a: &sa, b: &sb, mu: &mu, nu: &nu, fit: Fit::Concave(c.clone()) };
    let best = search(&prob, cfg, exact, lower - log)?;
    let upper = (log + best.value).max(lower);
    Ok(DistanceBracket {
        lower,
        upper,
        lower_method: "log-ratio+Wc(base-distance laws)".into(),
        upper_method: if exact { "gluing search+LP refinement" } else { "gluing search" }.into(),
    })
}

/// The dyadic range over which cutoffs change: below `k_lo` only the basepoint
/// survives, from `k_hi` on nothing is cut.
pub fn stable_range(space: &FinitePmmSpace) -> (i32, i32) {
    let r = space.base_distances();
    let supp = space.support();
    let rmin = supp.iter().map(|&i| r[i]).filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    let rmax = supp.iter().map(|&i| r[i]).fold(0.0, f64::max);
    if !rmin.is_finite() {
        return (0, 0);
    }
    ((rmin.log2().floor() as i32) - 1, rmax.log2().ceil() as i32)
}

/// Default summation range: both spaces are stable outside it.
pub fn default_k_range(a: &FinitePmmSpace, b: &FinitePmmSpace) -> (i32, i32) {
    let (la, ha) = stable_range(a);
    let (lb, hb) = stable_range(b);
    (la.min(lb).min(0), ha.max(hb).max(0))
}

/// Per-scale record of a [`pgw`] evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PgwTerm {
    pub k: i32,
    pub weight: f64,
    pub bracket: DistanceBracket,
}

/// `Σ_k 2^{-|k|} min(1, pgw_fm(a_[k], b_[k]))` as a bracket, with per-scale terms.
///
/// When `[k_min, k_max]` covers the stable ranges of both spaces the omitted
/// terms are constant and summed exactly (geometric series); otherwise each
/// omitted term is bounded by 1 and the tail mass `2^{k_min} + 2^{-k_max}` is
/// added to the upper bound only.
pub fn pgw(
    a: &FinitePmmSpace,
    b: &FinitePmmSpace,
    k_range: Option<(i32, i32)>,
    mode: PgwMode,
    c: &ConcaveCost,
    cfg: &SearchConfig,
) -> Result<(DistanceBracket, Vec<PgwTerm>)> {
    let (a, b) = canonical(a, b);
    let (k_min, k_max) = k_range.unwrap_or_else(|| default_k_range(a, b));
    if k_min > 0 || k_max < 0 {
        return Err(Error::InvalidInput(format!("k-range must contain 0, got [{k_min}, {k_max}]")));
    }
    let zeta = CutoffSpec::default();
    let terms: Vec<Result<PgwTerm>> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let bracket = pgw_fm(&cutoff_rescale(a, k, &zeta), &cutoff_rescale(b, k, &zeta), mode, c, cfg)?;
            Ok(PgwTerm { k, weight: 2f64.powi(-k.abs()), bracket })
        })
        .collect();
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;

    let (mut lower, mut upper) = (0.0, 0.0);
    for t in &terms {
        lower += t.weight * t.bracket.lower.min(1.0);
        upper += t.weight * t.bracket.upper.min(1.0);
    }
    let (la, ha) = stable_range(a);
    let (lb, hb) = stable_range(b);
    let first = &terms[0].bracket;
    let last = &terms[terms.len() - 1].bracket;
    let low_tail = 2f64.powi(k_min);
    let high_tail = 2f64.powi(-k_max);
    let mut exact_tails = true;
    if k_min <= la.min(lb) {
        lower += low_tail * first.lower.min(1.0);
        upper += low_tail * first.upper.min(1.0);
    } else {
        upper += low_tail;
        exact_tails = false;
    }
    if k_max >= ha.max(hb) {
        lower += high_tail * last.lower.min(1.0);
        upper += high_tail * last.upper.min(1.0);
    } else {
        upper += high_tail;
        exact_tails = false;
    }
    let tail_tag = if exact_tails { "exact tails" } else { "tail bound" };
    Ok((
        DistanceBracket {
            lower,
            upper,
            lower_method: format!("dyadic sum of lower bounds, {tail_tag}"),
            upper_method: format!("dyadic sum of upper bounds, {tail_tag}"),
        },
        terms,
    ))
}

/// `Σ_{|k|>K} 2^{-|k|}` for symmetric truncation at `K`.
pub fn symmetric_tail_bound(k: u32) -> f64 {
    2f64.powi(1 - k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn two_point(d: f64, a: f64, b: f64) -> FinitePmmSpace {
        FinitePmmSpace::from_rows(&[vec![0.0, d], vec![d, 0.0]], vec![a, b], 0).unwrap()
    }

    #[test]
    fn identical_spaces_are_at_zero() {
        let s = FinitePmmSpace::from_rows(
            &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]],
            vec![0.2, 0.3, 0.5],
            1,
        )
        .unwrap();
        let cfg = SearchConfig::default();
        let c = ConcaveCost::min1();
        let br = pgw_fm(&s, &s, PgwMode::Bracket, &c, &cfg).unwrap();
        assert_eq!(br.lower, 0.0);
        assert!(br.upper <= 1e-9);
        assert!(dpsi_upper(&s, &s, &WeightSpec::gaussian(1.0), &cfg).unwrap() <= 1e-9);
        assert_eq!(dpsi_lower(&s, &s, &WeightSpec::gaussian(1.0)).unwrap(), 0.0);
        let (p, _) = pgw(&s, &s, None, PgwMode::Bracket, &c, &cfg).unwrap();
        assert!(p.upper <= 1e-9);
    }

    #[test]
    fn point_masses_give_log_ratio() {
        let a = FinitePmmSpace::point(1.0).unwrap();
        let b = FinitePmmSpace::point(E).unwrap();
        let cfg = SearchConfig::default();
        let c = ConcaveCost::min1();
        let br = pgw_fm(&a, &b, PgwMode::ExactTiny, &c, &cfg).unwrap();
        assert!((br.lower - 1.0).abs() < 1e-15 && (br.upper - 1.0).abs() < 1e-15);
        let psi = WeightSpec::constant(1.0);
        let d = dpsi_upper(&a, &b, &psi, &cfg).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    /// Grid oracle over cross ∈ [0,2]² at step 1e-3.
    #[test]
    fn exact_tiny_matches_grid_enumeration() {
        let a = two_point(1.0, 0.5, 0.5);
        let b = FinitePmmSpace::point(1.0).unwrap();
        let c = ConcaveCost::min1();
        let h = 1e-3;
        let mut best = f64::INFINITY;
        for p in 0..=2000 {
            for q in 0..=2000 {
                let (x0, x1) = (p as f64 * h, q as f64 * h);
                if (x0 - x1).abs() <= 1.0 + 1e-12 && x0 + x1 >= 1.0 - 1e-12 {
                    best = best.min(x0 + 0.5 * c.eval(x0) + 0.5 * c.eval(x1));
                }
            }
        }
        let br = pgw_fm(&a, &b, PgwMode::ExactTiny, &c, &SearchConfig::default()).unwrap();
        assert!((br.upper - best).abs() <= 1e-3, "{} vs {best}", br.upper);
        assert!((best - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_tiny_rejects_large_supports() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let s = FinitePmmSpace::from_points(&pts, vec![1.0; 5], 0).unwrap();
        let r = pgw_fm(&s, &s, PgwMode::ExactTiny, &ConcaveCost::min1(), &SearchConfig::default());
        assert!(matches!(r, Err(Error::SizeCap { .. })));
    }

    #[test]
    fn mass_ratio_lower_bound_is_exact() {
        let a = two_point(1.0, 1.0, 1.0);
        let b = two_point(1.0, 3.0, 3.0);
        let psi = WeightSpec::constant(1.0);
        assert!((dpsi_lower(&a, &b, &psi).unwrap() - 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn profile_lower_bound_two_points() {
        // laws {0,1} vs {0,2} with weights ½: 1-D monotone matching gives W₂² = ½·1
        let a = two_point(1.0, 0.5, 0.5);
        let b = two_point(2.0, 0.5, 0.5);
        let lb = dpsi_lower(&a, &b, &WeightSpec::constant(1.0)).unwrap();
        assert!((lb - 0.5f64.sqrt()).abs() < 1e-14);
        let ub = dpsi_upper(&a, &b, &WeightSpec::constant(1.0), &SearchConfig::default()).unwrap();
        assert!(ub >= lb - 1e-9);
    }

    #[test]
    fn tail_bound_and_ranges() {
        assert!((symmetric_tail_bound(10) - 1.953125e-3).abs() < 1e-15);
        let s = two_point(3.0, 1.0, 1.0);
        assert_eq!(stable_range(&s), (0, 2));
        assert_eq!(stable_range(&FinitePmmSpace::point(1.0).unwrap()), (0, 0));
    }

    #[test]
    fn pgw_is_symmetric() {
        let a = FinitePmmSpace::from_rows(
            &[vec![0.0, 1.0, 1.5], vec![1.0, 0.0, 0.7], vec![1.5, 0.7, 0.0]],
            vec![0.5, 0.2, 0.4],
            0,
        )
        .unwrap();
        let b = two_point(0.8, 0.6, 0.6);
        let c = ConcaveCost::min1();
        let cfg = SearchConfig::default();
        let (x, _) = pgw(&a, &b, None, PgwMode::ExactTiny, &c, &cfg).unwrap();
        let (y, _) = pgw(&b, &a, None, PgwMode::ExactTiny, &c, &cfg).unwrap();
        assert_eq!(x, y);
        assert!(x.lower <= x.upper + 1e-9);
    }
}
