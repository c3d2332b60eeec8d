use mmgeo::transport::{optimal_coupling, sinkhorn, squared, w2, wc, ConcaveCost};
use mmgeo::FinitePmmSpace;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_space(rng: &mut ChaCha8Rng, n: usize) -> FinitePmmSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>() * 3.0, rng.random::<f64>()]).collect();
    FinitePmmSpace::from_points(&pts, vec![1.0; n], 0).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random() }).collect();
    let s: f64 = v.iter().sum();
    if s == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    v.into_iter().map(|x| x / s).collect()
}

#[test]
fn metric_axioms_on_five_point_spaces() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let costs = [ConcaveCost::min1(), ConcaveCost::tanh()];
    for _ in 0..100 {
        let s = random_space(&mut rng, 5);
        let (a, b, c) = (random_measure(&mut rng, 5), random_measure(&mut rng, 5), random_measure(&mut rng, 5));
        let (ab, ba, bc, ac) = (w2(&s, &a, &b).unwrap(), w2(&s, &b, &a).unwrap(), w2(&s, &b, &c).unwrap(), w2(&s, &a, &c).unwrap());
        assert_eq!(ab, ba);
        assert!(ac <= ab + bc + 1e-8);
        assert!(w2(&s, &a, &a).unwrap() < 1e-9);
        for cost in &costs {
            let (ab, ba) = (wc(&s, &a, &b, cost).unwrap(), wc(&s, &b, &a, cost).unwrap());
            assert_eq!(ab, ba);
            assert!(wc(&s, &a, &c, cost).unwrap() <= ab + wc(&s, &b, &c, cost).unwrap() + 1e-8);
        }
    }
}

#[test]
fn distinct_measures_are_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let s = random_space(&mut rng, 5);
        let (a, b) = (random_measure(&mut rng, 5), random_measure(&mut rng, 5));
        let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if gap > 1e-6 {
            assert!(w2(&s, &a, &b).unwrap() > 1e-9);
        }
    }
}

#[test]
fn value_is_invariant_under_simultaneous_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let (n, m) = (rng.random_range(2..7), rng.random_range(2..7));
        let cost = DMatrix::from_fn(n, m, |_, _| rng.random::<f64>());
        let (mu, nu) = (random_measure(&mut rng, n), random_measure(&mut rng, m));
        let (_, base) = optimal_coupling(&mu, &nu, &cost).unwrap();
        let mut p: Vec<usize> = (0..n).collect();
        let mut q: Vec<usize> = (0..m).collect();
        p.reverse();
        q.rotate_left(1);
        let cost2 = DMatrix::from_fn(n, m, |i, j| cost[(p[i], q[j])]);
        let mu2: Vec<f64> = p.iter().map(|&i| mu[i]).collect();
        let nu2: Vec<f64> = q.iter().map(|&j| nu[j]).collect();
        let (_, v) = optimal_coupling(&mu2, &nu2, &cost2).unwrap();
        assert!((v - base).abs() < 1e-12 * (1.0 + base));
    }
}

#[test]
fn mixtures_converge_continuously() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = random_space(&mut rng, 6);
    let (mu, nu) = (random_measure(&mut rng, 6), random_measure(&mut rng, 6));
    let mut prev = f64::INFINITY;
    for k in 0..12 {
        let t = 0.5f64.powi(k);
        let mix: Vec<f64> = mu.iter().zip(&nu).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let d = w2(&s, &mix, &mu).unwrap();
        assert!(d <= prev + 1e-12);
        prev = d;
    }
    assert!(prev < 0.05);
}

#[test]
fn entropic_cost_approaches_exact_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_space(&mut rng, 6);
    let (mu, nu) = (random_measure(&mut rng, 6), random_measure(&mut rng, 6));
    let cost = squared(s.dist());
    let (_, exact) = optimal_coupling(&mu, &nu, &cost).unwrap();
    let mut gaps = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let (v, plan, rep) = sinkhorn(&mu, &nu, &cost, eps, 100_000).unwrap();
        assert!(rep.converged);
        assert!(plan.marginal_error() < 1e-8);
        assert!(v >= exact - 1e-9);
        gaps.push(v - exact);
    }
    assert!(gaps[2] < gaps[0]);
    assert!(gaps[2] < 1e-2);
}
