//! Pointed isomorphism by branch-and-prune over base-fixing bijections.

use super::{support_restrict, FinitePmmSpace};

/// Default cap on support size for the exhaustive search.
pub const DEFAULT_ISO_CAP: usize = 10;

/// First invariant that tells two spaces apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IsoCertificate {
    SupportSize,
    MassMultiset,
    BaseDistanceProfile,
    ExhaustedSearch,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IsoOutcome {
    /// `map[i]` is the index in `b` matched with support index `i` of `a`
    /// (original indices; zero-mass points of `a` map to `usize::MAX`).
    Isomorphic(Vec<usize>),
    NotIsomorphic(IsoCertificate),
    /// The support exceeds the search cap and cheap invariants agree.
    Undecided,
}

impl IsoOutcome {
    pub fn is_isomorphic(&self) -> Option<bool> {
        match self {
            IsoOutcome::Isomorphic(_) => Some(true),
            IsoOutcome::NotIsomorphic(_) => Some(false),
            IsoOutcome::Undecided => None,
        }
    }
}

/// Decides whether `a` and `b` are isomorphic as pointed metric measure spaces.
///
/// Both spaces are restricted to their supports first. Distances and masses
/// are compared with absolute tolerance `tol`.
pub fn is_isomorphic(a: &FinitePmmSpace, b: &FinitePmmSpace, tol: f64, cap: usize) -> IsoOutcome {
    let (Ok((sa, ka)), Ok((sb, kb))) = (support_restrict(a), support_restrict(b)) else {
        return IsoOutcome::NotIsomorphic(IsoCertificate::SupportSize);
    };
    let n = sa.n();
    if n != sb.n() {
        return IsoOutcome::NotIsomorphic(IsoCertificate::SupportSize);
    }

    let sorted = |v: Vec<f64>| {
        let mut v = v;
        v.sort_by(f64::total_cmp);
        v
    };
    let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= tol);
    if !close(&sorted(sa.mass().to_vec()), &sorted(sb.mass().to_vec())) {
        return IsoOutcome::NotIsomorphic(IsoCertificate::MassMultiset);
    }
    let profile = |s: &FinitePmmSpace| {
        let mut p: Vec<(f64, f64)> = (0..s.n()).map(|i| (s.d(i, s.base()), s.mass()[i])).collect();
        p.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        p
    };
    let (pa, pb) = (profile(&sa), profile(&sb));
    let prof_close = pa
        .iter()
        .zip(&pb)
        .all(|(x, y)| (x.0 - y.0).abs() <= tol && (x.1 - y.1).abs() <= tol);
    if !prof_close {
        return IsoOutcome::NotIsomorphic(IsoCertificate::BaseDistanceProfile);
    }
    if n > cap {
        return IsoOutcome::Undecided;
    }

    // Order a's points: base first, then by how constrained they are.
    let mut order: Vec<usize> = (0..n).filter(|&i| i != sa.base()).collect();
    order.sort_by(|&x, &y| {
        sa.d(x, sa.base())
            .total_cmp(&sa.d(y, sa.base()))
            .then(sa.mass()[x].total_cmp(&sa.mass()[y]))
    });
    order.insert(0, sa.base());

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[sa.base()] = sb.base();
    used[sb.base()] = true;
    if (sa.mass()[sa.base()] - sb.mass()[sb.base()]).abs() > tol {
        return IsoOutcome::NotIsomorphic(IsoCertificate::ExhaustedSearch);
    }

    if extend(&sa, &sb, &order, 1, &mut map, &mut used, tol) {
        let mut full = vec![usize::MAX; a.n()];
        for (i, &j) in map.iter().enumerate() {
            full[ka[i]] = kb[j];
        }
        IsoOutcome::Isomorphic(full)
    } else {
        IsoOutcome::NotIsomorphic(IsoCertificate::ExhaustedSearch)
    }
}

fn extend(
    a: &FinitePmmSpace,
    b: &FinitePmmSpace,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
    tol: f64,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let x = order[depth];
    for y in 0..b.n() {
        if used[y] || (a.mass()[x] - b.mass()[y]).abs() > tol {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&p| (a.d(x, p) - b.d(y, map[p])).abs() <= tol);
        if !consistent {
            continue;
        }
        map[x] = y;
        used[y] = true;
        if extend(a, b, order, depth + 1, map, used, tol) {
            return true;
        }
        used[y] = false;
        map[x] = usize::MAX;
    }
    false
}
