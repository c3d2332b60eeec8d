//! Doubling constants and covering numbers.

use super::FinitePmmSpace;

fn ball_mass(space: &FinitePmmSpace, x: usize, r: f64) -> f64 {
    (0..space.n())
        .filter(|&y| space.d(x, y) <= r)
        .map(|y| space.mass()[y])
        .sum()
}

/// `sup m(B_{2R}(x)) / m(B_R(x))` over support points `x` and radii `R` in `radii`
/// (closed balls). Returns 1 for an empty grid.
pub fn doubling_constant(space: &FinitePmmSpace, radii: &[f64]) -> f64 {
    let mut c: f64 = 1.0;
    for x in space.support() {
        for &r in radii {
            let inner = ball_mass(space, x, r);
            c = c.max(ball_mass(space, x, 2.0 * r) / inner);
        }
    }
    c
}

fn target_set(space: &FinitePmmSpace, radius: f64) -> Vec<usize> {
    space
        .support()
        .into_iter()
        .filter(|&i| space.d(i, space.base()) <= radius)
        .collect()
}

/// Greedy max-coverage `eps`-net of `B_radius(x̄) ∩ supp m`; returns the centers.
///
/// Greedy is within a logarithmic factor of optimal and, unlike the exact
/// count, need not be monotone in `eps`.
pub fn greedy_cover(space: &FinitePmmSpace, eps: f64, radius: f64) -> Vec<usize> {
    let pts = target_set(space, radius);
    let mut covered = vec![false; pts.len()];
    let mut centers = Vec::new();
    while covered.iter().any(|c| !c) {
        let (best, _) = pts
            .iter()
            .map(|&c| {
                let gain = pts
                    .iter()
                    .zip(&covered)
                    .filter(|(&p, &cv)| !cv && space.d(c, p) <= eps)
                    .count();
                (c, gain)
            })
            .fold((usize::MAX, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        centers.push(best);
        for (k, &p) in pts.iter().enumerate() {
            if space.d(best, p) <= eps {
                covered[k] = true;
            }
        }
    }
    centers
}

/// Minimum number of `eps`-balls centred in the target set that cover it.
/// Exhaustive over subsets; returns `None` above 20 target points.
pub fn exact_cover_size(space: &FinitePmmSpace, eps: f64, radius: f64) -> Option<usize> {
    let pts = target_set(space, radius);
    let k = pts.len();
    if k > 20 {
        return None;
    }
    let full: u32 = (1u32 << k) - 1;
    let balls: Vec<u32> = pts
        .iter()
        .map(|&c| {
            pts.iter()
                .enumerate()
                .filter(|(_, &p)| space.d(c, p) <= eps)
                .fold(0u32, |m, (i, _)| m | (1 << i))
        })
        .collect();
    // breadth-first over cover sizes
    let mut reach = vec![false; 1 << k];
    let mut frontier = vec![0u32];
    reach[0] = true;
    for size in 0..=k {
        if frontier.contains(&full) {
            return Some(size);
        }
        let mut next = Vec::new();
        for &m in &frontier {
            for &b in &balls {
                let nm = m | b;
                if !reach[nm as usize] {
                    reach[nm as usize] = true;
                    next.push(nm);
                }
            }
        }
        frontier = next;
    }
    Some(k)
}

/// Covering number of `B_radius(x̄) ∩ supp m` at scale `eps`:
/// exact for up to 16 target points, greedy above.
pub fn covering_number(space: &FinitePmmSpace, eps: f64, radius: f64) -> usize {
    if target_set(space, radius).len() <= 16 {
        exact_cover_size(space, eps, radius).expect("within exact range")
    } else {
        greedy_cover(space, eps, radius).len()
    }
}
