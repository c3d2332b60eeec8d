//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::Instant;

use mmgeo::entropyflow::{
    apriori_check, contraction_check, ede_residual, entropy, entropy_decomposition, jko_flow, recovery_sequence,
    FlowTrace, JkoParams,
};
use mmgeo::gromov::{cyl_pushforward, dpsi_upper, pgw, pgw_fm, PgwMode, SearchConfig, DEFAULT_CYL_ATOM_CAP};
use mmgeo::lab::{
    gen_circle, gen_interval_with_atom, gen_split_interval, gen_unit_interval, pmgh_compare, run_suite,
    ExperimentConfig, SuiteKind,
};
use mmgeo::space::{is_isomorphic, FinitePmmSpace, WeightSpec, DEFAULT_ISO_CAP};
use mmgeo::spectral::{
    eigen_convergence, heat_measure, heat_semigroup, quadratic_form_check, spectrum, HeatMode, LaplaceOperator,
};
use mmgeo::transport::{optimal_coupling, squared, w2, wc, ConcaveCost};
use mmgeo::entropyflow::GraphDirichlet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn planar(rng: &mut ChaCha8Rng, n: usize) -> FinitePmmSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0]).collect();
    let mass = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
    let base = rng.random_range(0..n);
    FinitePmmSpace::from_points(&pts, mass, base).unwrap()
}

fn probability(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let t: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= t);
    v
}

fn decays(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0]) && v[v.len() - 1] <= 0.25 * v[0]
}

fn metric_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = ConcaveCost::min1();
    let cfg = SearchConfig::default();
    let mut tri: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let s: Vec<FinitePmmSpace> = (0..3).map(|_| {
            let n = rng.random_range(1..=3);
            planar(&mut rng, n)
        }).collect();
        let d = |x: &FinitePmmSpace, y: &FinitePmmSpace| pgw_fm(x, y, PgwMode::ExactTiny, &c, &cfg).unwrap().upper;
        let ab = d(&s[0], &s[1]);
        if ab != d(&s[1], &s[0]) {
            return Err("pgw_fm is not exactly symmetric".into());
        }
        tri = tri.max(d(&s[0], &s[2]) - ab - d(&s[1], &s[2]));
    }
    let mut tri_t: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let s = planar(&mut rng, 5);
        let (p, q, r) = (probability(&mut rng, 5), probability(&mut rng, 5), probability(&mut rng, 5));
        let w = |a: &[f64], b: &[f64]| w2(&s, a, b).unwrap();
        let v = |a: &[f64], b: &[f64]| wc(&s, a, b, &c).unwrap();
        tri_t = tri_t.max(w(&p, &r) - w(&p, &q) - w(&q, &r));
        tri_t = tri_t.max(v(&p, &r) - v(&p, &q) - v(&q, &r));
    }
    let msg = format!("pgw_fm triangle excess {tri:.2e} (≤2e-3), W2/Wc triangle excess {tri_t:.2e} (≤1e-8)");
    if tri <= 2e-3 && tri_t <= 1e-8 { Ok(msg) } else { Err(msg) }
}

fn isomorphism_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = ConcaveCost::min1();
    let cfg = SearchConfig::default();
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let n = rng.random_range(1..=8);
        let a = planar(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let b = a.relabel(&perm).unwrap();
        if is_isomorphic(&a, &b, 1e-12, DEFAULT_ISO_CAP).is_isomorphic() != Some(true) {
            return Err(format!("trial {t}: relabeling not recognized"));
        }
        for order in [2, 3] {
            let ca = cyl_pushforward(&a, order, DEFAULT_CYL_ATOM_CAP).unwrap();
            let cb = cyl_pushforward(&b, order, DEFAULT_CYL_ATOM_CAP).unwrap();
            if ca != cb {
                return Err(format!("trial {t}: cylindrical measures of order {order} differ"));
            }
        }
        worst = worst.max(pgw_fm(&a, &b, PgwMode::Bracket, &c, &cfg).unwrap().upper);
    }
    let msg = format!("50 relabelings isomorphic, cylindrical measures identical, max pgw_fm upper {worst:.2e} (≤1e-6)");
    if worst <= 1e-6 { Ok(msg) } else { Err(msg) }
}

const LADDER: [usize; 4] = [4, 8, 16, 32];

fn intro_example() -> Outcome {
    let point = FinitePmmSpace::point(1.0).unwrap();
    let c = ConcaveCost::min1();
    let cfg = SearchConfig::default();
    let psi = WeightSpec::cubic_tail();
    let mut p = Vec::new();
    let mut d = Vec::new();
    for n in LADDER {
        let s = gen_interval_with_atom(n).unwrap();
        p.push(pgw(&s, &point, None, PgwMode::Bracket, &c, &cfg).unwrap().0.upper);
        d.push(dpsi_upper(&s, &point, &psi, &cfg).unwrap());
    }
    let msg = format!("pgw {p:.4?}, dpsi upper {d:.4?}");
    if decays(&p) && decays(&d) { Ok(msg) } else { Err(msg) }
}

fn split_separation() -> Outcome {
    let c = ConcaveCost::min1();
    let cfg = SearchConfig::default();
    let mut p = Vec::new();
    let mut gh = Vec::new();
    for n in LADDER {
        let a = gen_split_interval(n).unwrap();
        let b = gen_unit_interval(4 * n).unwrap();
        p.push(pgw(&a, &b, None, PgwMode::Bracket, &c, &cfg).unwrap().0.upper);
        gh.push(pmgh_compare(&a, &b, &[0.5]).unwrap().lower);
    }
    let msg = format!("pgw upper {p:.4?}, pmGH lower {gh:.4?}");
    if p[p.len() - 1] <= 0.25 * p[0] && gh.iter().all(|&g| g >= 0.5) { Ok(msg) } else { Err(msg) }
}

fn entropy_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let s = planar(&mut rng, n);
        let mu = probability(&mut rng, n);
        let (_, _, r) = entropy_decomposition(&mu, &s, rng.random::<f64>() * 5.0);
        worst = worst.max(r);
    }
    let msg = format!("max residual {worst:.2e} (≤1e-10)");
    if worst <= 1e-10 { Ok(msg) } else { Err(msg) }
}

fn gamma_limsup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = planar(&mut rng, 20);
    let normalize = |v: &[f64]| -> Vec<f64> {
        let t: f64 = v.iter().sum();
        v.iter().map(|x| x / t).collect()
    };
    let mut worst_ent: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for _ in 0..10 {
        let mu = probability(&mut rng, 20);
        for n in 2..=64usize {
            let f = 1.0 + if n % 2 == 0 { 1.0 } else { -1.0 } / n as f64;
            let sn = base.with_mass(base.mass().iter().map(|m| f * m).collect()).unwrap();
            let (g, _) = optimal_coupling(&normalize(base.mass()), &normalize(sn.mass()), &squared(base.dist())).unwrap();
            let mun = recovery_sequence(&mu, &g).unwrap();
            let de = (entropy(&mun, &sn) - entropy(&mu, &base)).abs() * n as f64;
            let dw = w2(&base, &mun, &mu).unwrap() * n as f64;
            worst_ent = worst_ent.max(de);
            worst_w = worst_w.max(dw);
        }
    }
    let msg = format!("max n·|ΔEnt| {worst_ent:.3} (≤5), max n·W2 {worst_w:.2e} (≤5), n = 2..64");
    if worst_ent <= 5.0 && worst_w <= 5.0 { Ok(msg) } else { Err(msg) }
}

struct Circle {
    space: FinitePmmSpace,
    graph: GraphDirichlet,
    op: LaplaceOperator,
    mu0: Vec<f64>,
    nu0: Vec<f64>,
}

fn circle32() -> Circle {
    let n = 32;
    let (space, graph) = gen_circle(n, 1.0).unwrap();
    let op = LaplaceOperator::new(&graph).unwrap();
    let floor = 0.001 / n as f64;
    let mut mu0 = vec![floor; n];
    mu0[0] += 0.4995;
    mu0[8] += 0.4995;
    let mut nu0 = vec![floor; n];
    nu0[3] += 0.999 * 0.3;
    nu0[20] += 0.999 * 0.7;
    Circle { space, graph, op, mu0, nu0 }
}

fn flow_identification(c: &Circle, coarse: &FlowTrace, fine: &FlowTrace) -> Outcome {
    let spec = spectrum(&c.op, 32).unwrap();
    let gap = |tr: &FlowTrace| {
        [0.01, 0.05, 0.1]
            .iter()
            .map(|&t| {
                let k = tr.index_of(t).unwrap();
                w2(&c.space, &tr.states[k], &heat_measure(&spec, c.space.mass(), &c.mu0, t)).unwrap()
            })
            .fold(0.0, f64::max)
    };
    let (gc, gf) = (gap(coarse), gap(fine));
    let msg = format!("max W2 gap τ=1e-3: {gf:.3e} (≤5e-2), τ=1e-2: {gc:.3e}");
    if gf <= 5e-2 && gf <= gc { Ok(msg) } else { Err(msg) }
}

fn ede(c: &Circle, coarse: &FlowTrace, fine: &FlowTrace) -> Outcome {
    let (rc, rf) = (ede_residual(coarse, &c.graph).max_residual(), ede_residual(fine, &c.graph).max_residual());
    let msg = format!("max residual τ=1e-3: {rf:.3}, τ=1e-2: {rc:.3}");
    if rf < rc { Ok(msg) } else { Err(msg) }
}

fn contraction(c: &Circle, fine: &FlowTrace) -> Outcome {
    let other = jko_flow(&c.nu0, 1e-3, fine.times[fine.len() - 1], &c.space, &c.graph, &JkoParams::default()).unwrap();
    let jko = contraction_check(fine, &other, &c.space, 0.0).unwrap();
    let spec = spectrum(&c.op, 32).unwrap();
    let states = |s: &[f64]| (0..=13).map(|k| heat_measure(&spec, c.space.mass(), s, k as f64 * 1e-2)).collect();
    let ea = FlowTrace::from_states(1e-2, states(&c.mu0), &c.space, &c.graph).unwrap();
    let eb = FlowTrace::from_states(1e-2, states(&c.nu0), &c.space, &c.graph).unwrap();
    let exact = contraction_check(&ea, &eb, &c.space, 0.0).unwrap();
    let msg = format!("violation exact heat {exact:.2e} (≤1e-3), minimizing movement {jko:.2e} (≤5e-3)");
    if exact <= 1e-3 && jko <= 5e-3 { Ok(msg) } else { Err(msg) }
}

fn apriori(c: &Circle) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let mut v: Vec<f64> = (0..32).map(|_| (-(1.0 - rng.random::<f64>()).ln()).powi(3)).collect();
        let t: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= t);
        let tr = jko_flow(&v, 1e-3, 0.125, &c.space, &c.graph, &JkoParams::default()).unwrap();
        let rep = apriori_check(&tr, &c.space, &c.graph, 1.0, 0.0).unwrap();
        if !rep.passed() {
            return Err(format!("failed: {rep:?}"));
        }
        worst = worst.min(rep.speed_slack()).min(rep.estimate_slack);
    }
    Ok(format!("20 random starts pass, smallest slack {worst:.3e}"))
}

fn ladder() -> Vec<(usize, GraphDirichlet)> {
    [16, 32, 64, 128].iter().map(|&n| (n, gen_circle(n, 1.0).unwrap().1)).collect()
}

fn quadratic_form() -> Outcome {
    let mut graphs: Vec<(String, GraphDirichlet)> =
        ladder().into_iter().map(|(n, g)| (format!("circle({n})"), g)).collect();
    for n in LADDER {
        let s = gen_interval_with_atom(n).unwrap();
        graphs.push((format!("interval_with_atom({n})"), GraphDirichlet::eps_graph(&s, 1.0 / n as f64, 1.0).unwrap()));
        let s = gen_split_interval(n).unwrap();
        graphs.push((format!("split_interval({n})"), GraphDirichlet::eps_graph(&s, 0.25 / n as f64, 1.0).unwrap()));
    }
    let worst = graphs.iter().map(|(_, g)| quadratic_form_check(g, 100, 11)).fold(0.0, f64::max);
    let msg = format!("{} graphs, max parallelogram residual {worst:.2e} (≤1e-10)", graphs.len());
    if worst <= 1e-10 { Ok(msg) } else { Err(msg) }
}

fn spectral_convergence() -> Outcome {
    let graphs: Vec<GraphDirichlet> = ladder().into_iter().map(|(_, g)| g).collect();
    let table = eigen_convergence(&graphs, 5).unwrap();
    if table.minmax.iter().any(|&m| m > 1e-6) {
        return Err(format!("min-max defects {:?}", table.minmax));
    }
    let mut finals = Vec::new();
    for j in 1..=4usize {
        let limit = (2.0 * std::f64::consts::PI * j.div_ceil(2) as f64).powi(2);
        let errs: Vec<f64> = table.row(j).iter().map(|l| (l - limit).abs()).collect();
        if !errs.windows(2).all(|w| w[1] < w[0]) {
            return Err(format!("λ_{j} errors not strictly decreasing: {errs:?}"));
        }
        finals.push(errs[3] / limit);
    }
    let worst = finals.iter().copied().fold(0.0, f64::max);
    let zero = table.row(0).iter().map(|x| x.abs()).fold(0.0, f64::max);
    let msg = format!("errors strictly decreasing for λ_1..λ_4, final relative error {worst:.2e} (≤2%), |λ_0| ≤ {zero:.1e}");
    if worst <= 0.02 && zero <= 1e-10 { Ok(msg) } else { Err(msg) }
}

fn resolvent_bound(c: &Circle) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let t = 0.1;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f: Vec<f64> = (0..32).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let exact = heat_semigroup(&c.op, &f, t, HeatMode::Spectral).unwrap();
        let e = c.op.energy(&f);
        for k in [1usize, 4, 16, 64] {
            let approx = heat_semigroup(&c.op, &f, t, HeatMode::Resolvent { k_steps: k }).unwrap();
            let d: Vec<f64> = approx.iter().zip(&exact).map(|(a, b)| a - b).collect();
            worst = worst.max(c.op.inner(&d, &d) / (2.0 * e * t / k as f64));
        }
    }
    let msg = format!("max ‖H_t f − J^k f‖² / (2E(f)t/k) = {worst:.3e} (≤1)");
    if worst <= 1.0 { Ok(msg) } else { Err(msg) }
}

fn determinism() -> Outcome {
    let mut parts = Vec::new();
    for kind in [SuiteKind::Convergence, SuiteKind::Flow, SuiteKind::MoscoSpectral] {
        let cfg = ExperimentConfig { seed: 7, ..ExperimentConfig::new(kind) };
        let a = run_suite(&cfg).map_err(|e| e.to_string())?;
        let b = run_suite(&cfg).map_err(|e| e.to_string())?;
        if a.csv != b.csv || a.json != b.json {
            return Err(format!("suite {} differs between runs", kind.name()));
        }
        parts.push(format!("{} ({} rows, checks {})", kind.name(), a.rows.len(), if a.summary.passed { "pass" } else { "fail" }));
    }
    Ok(format!("byte-identical reruns: {}", parts.join(", ")))
}

type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() -> ExitCode {
    let c = circle32();
    let params = JkoParams::default();
    let coarse = jko_flow(&c.mu0, 1e-2, 0.13, &c.space, &c.graph, &params).unwrap();
    let fine = jko_flow(&c.mu0, 1e-3, 0.13, &c.space, &c.graph, &params).unwrap();
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("metric axioms", Box::new(metric_axioms)),
        ("isomorphism invariance", Box::new(isomorphism_invariance)),
        ("interval-with-atom convergence", Box::new(intro_example)),
        ("pmG vs pmGH separation", Box::new(split_separation)),
        ("entropy identity", Box::new(entropy_identity)),
        ("Gamma-limsup recovery", Box::new(gamma_limsup)),
        ("flow identification", Box::new(|| flow_identification(&c, &coarse, &fine))),
        ("EDE residual", Box::new(|| ede(&c, &coarse, &fine))),
        ("W2 contraction", Box::new(|| contraction(&c, &fine))),
        ("a priori estimates", Box::new(|| apriori(&c))),
        ("quadratic form", Box::new(quadratic_form)),
        ("spectral convergence", Box::new(spectral_convergence)),
        ("resolvent/semigroup bound", Box::new(|| resolvent_bound(&c))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, msg) = match check() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("{tag} {:>2} {name}: {msg} [{:.1}s]", i + 1, t.elapsed().as_secs_f64());
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
