//! Reproducible experiment suites.
//!
//! Each suite writes a long-format CSV (`section,n,param,key,value`) and a JSON
//! summary of threshold checks. Nothing time- or thread-dependent enters the
//! output, so a rerun with the same configuration is byte-identical.

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{circle_cross_dist, gen_circle, gen_interval_with_atom, gen_split_interval, gen_unit_interval, pmgh_compare};
use crate::entropyflow::{apriori_check, contraction_check, ede_residual, jko_flow, FlowTrace, JkoParams};
use crate::error::{invalid, Error, Result};
use crate::gromov::{dpsi, pgw, PgwMode, SearchConfig};
use crate::space::{FinitePmmSpace, WeightSpec};
use crate::spectral::{
    eigen_convergence, heat_measure, heat_semigroup, mosco_diagnostic, quadratic_form_check, spectrum, wlsti_fit,
    HeatMode, LaplaceOperator, MoscoStage,
};
use crate::transport::{optimal_coupling, w2, ConcaveCost};

pub const SUITE_SCHEMA: &str = "mmgeo-suite/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    /// Distances along the interval-with-atom and split-interval families.
    Convergence,
    /// Minimizing movement against the exact heat flow on the circle.
    Flow,
    /// Laplacian spectra, resolvents and recovery sequences on circle refinements.
    MoscoSpectral,
}

impl SuiteKind {
    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Convergence => "convergence",
            SuiteKind::Flow => "flow",
            SuiteKind::MoscoSpectral => "mosco-spectral",
        }
    }

    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            SuiteKind::Convergence => vec![4, 8, 16, 32],
            SuiteKind::Flow => vec![32],
            SuiteKind::MoscoSpectral => vec![16, 32, 64, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: SuiteKind,
    /// Family sizes, strictly increasing.
    pub sizes: Vec<usize>,
    pub seed: u64,
    /// Directory receiving `<suite>.csv` and `<suite>.json`.
    pub out: Option<PathBuf>,
    /// Multiplies every acceptance threshold (1 keeps them as shipped).
    pub tol_scale: f64,
    /// Random starts for the a priori check in the flow suite.
    pub random_starts: usize,
}

impl ExperimentConfig {
    pub fn new(suite: SuiteKind) -> Self {
        Self { suite, sizes: suite.default_sizes(), seed: 0, out: None, tol_scale: 1.0, random_starts: 20 }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("sizes must be strictly increasing");
        }
        if !(self.tol_scale > 0.0) {
            return invalid("tol_scale must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub section: String,
    pub n: usize,
    pub param: String,
    pub key: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub schema: String,
    pub suite: SuiteKind,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteArtifacts {
    pub rows: Vec<SuiteRow>,
    pub summary: SuiteSummary,
    pub csv: String,
    pub json: String,
}

fn row(section: &str, n: usize, param: impl ToString, key: &str, value: f64) -> SuiteRow {
    SuiteRow { section: section.into(), n, param: param.to_string(), key: key.into(), value }
}

/// `value ≤ threshold`.
fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, threshold, passed: value <= threshold }
}

/// `value ≥ threshold`.
fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, threshold, passed: value >= threshold }
}

/// Nonincreasing along the ladder and the last value at most a quarter of the first.
fn decay_check(name: &str, values: &[f64]) -> Vec<Check> {
    if values.len() < 2 {
        return Vec::new();
    }
    let rises = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    vec![
        at_most(format!("{name}: largest increase"), rises, 0.0),
        at_most(format!("{name}: last/first"), values[values.len() - 1] / values[0], 0.25),
    ]
}

pub fn read_suite_csv(text: &str) -> Result<Vec<SuiteRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_csv(rows: &[SuiteRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["section", "n", "param", "key", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Runs a suite, writing its artifacts when `config.out` is set.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteArtifacts> {
    config.validate()?;
    let (rows, checks) = if config.sizes.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        match config.suite {
            SuiteKind::Convergence => convergence(config)?,
            SuiteKind::Flow => flow(config)?,
            SuiteKind::MoscoSpectral => mosco_spectral(config)?,
        }
    };
    let summary = SuiteSummary {
        schema: SUITE_SCHEMA.into(),
        suite: config.suite,
        seed: config.seed,
        sizes: config.sizes.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let csv = write_csv(&rows)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    if let Some(dir) = &config.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.csv", config.suite.name())), &csv)?;
        fs::write(dir.join(format!("{}.json", config.suite.name())), &json)?;
    }
    Ok(SuiteArtifacts { rows, summary, csv, json })
}

type Output = (Vec<SuiteRow>, Vec<Check>);

fn convergence(cfg: &ExperimentConfig) -> Result<Output> {
    let search = SearchConfig { seed: cfg.seed, ..SearchConfig::default() };
    let cost = ConcaveCost::min1();
    let psi = WeightSpec::cubic_tail();
    let point = FinitePmmSpace::point(1.0)?;
    let per_n = cfg
        .sizes
        .par_iter()
        .map(|&n| -> Result<Vec<SuiteRow>> {
            let atom = gen_interval_with_atom(n)?;
            let (pa, _) = pgw(&atom, &point, None, PgwMode::Bracket, &cost, &search)?;
            let da = dpsi(&atom, &point, &psi, &search)?;
            let split = gen_split_interval(n)?;
            let unit = gen_unit_interval(4 * n)?;
            let (ps, _) = pgw(&split, &unit, None, PgwMode::Bracket, &cost, &search)?;
            let gh = pmgh_compare(&split, &unit, &[0.5])?;
            Ok(vec![
                row("interval-with-atom", n, "point", "pgw_lower", pa.lower),
                row("interval-with-atom", n, "point", "pgw_upper", pa.upper),
                row("interval-with-atom", n, "point", "dpsi_lower", da.lower),
                row("interval-with-atom", n, "point", "dpsi_upper", da.upper),
                row("split-interval", n, "unit-interval", "pgw_lower", ps.lower),
                row("split-interval", n, "unit-interval", "pgw_upper", ps.upper),
                row("split-interval", n, "unit-interval", "pmgh_lower", gh.lower),
                row("split-interval", n, "unit-interval", "pmgh_upper", gh.upper),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SuiteRow> = per_n.into_iter().flatten().collect();
    let series = |section: &str, key: &str| -> Vec<f64> {
        rows.iter().filter(|r| r.section == section && r.key == key).map(|r| r.value).collect()
    };
    let mut checks = Vec::new();
    checks.extend(decay_check("interval-with-atom pgw upper", &series("interval-with-atom", "pgw_upper")));
    checks.extend(decay_check("interval-with-atom dpsi upper", &series("interval-with-atom", "dpsi_upper")));
    checks.extend(decay_check("split-interval pgw upper", &series("split-interval", "pgw_upper")));
    let gh = series("split-interval", "pmgh_lower").into_iter().fold(f64::INFINITY, f64::min);
    checks.push(at_least("split-interval pmgh lower (min over n)", gh, 0.5));
    Ok((rows, checks))
}

/// `0.999·(½δ_0 + ½δ_{n/4}) + 0.001·m` and a second, asymmetric two-atom start.
pub(crate) fn two_atom_starts(n: usize) -> (Vec<f64>, Vec<f64>) {
    let floor = 0.001 / n as f64;
    let mut a = vec![floor; n];
    a[0] += 0.4995;
    a[n / 4] += 0.4995;
    let mut b = vec![floor; n];
    b[3 * n / 32] += 0.999 * 0.3;
    b[5 * n / 8] += 0.999 * 0.7;
    (a, b)
}

const FLOW_TIMES: [f64; 3] = [0.01, 0.05, 0.1];
const FLOW_TAUS: [f64; 2] = [1e-2, 1e-3];

fn flow(cfg: &ExperimentConfig) -> Result<Output> {
    let s = cfg.tol_scale;
    let per_n = cfg.sizes.iter().map(|&n| flow_one(cfg, n)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (n, (r, f)) in cfg.sizes.iter().zip(per_n) {
        rows.extend(r);
        checks.push(at_most(format!("n={n}: heat gap at tau=1e-3"), f.gap_fine, 5e-2 * s));
        checks.push(at_most(format!("n={n}: heat gap fine minus coarse"), f.gap_fine - f.gap_coarse, 0.0));
        checks.push(at_most(format!("n={n}: EDE max fine minus coarse"), f.ede_fine - f.ede_coarse, 0.0));
        checks.push(at_most(format!("n={n}: contraction violation (exact heat)"), f.contraction_exact, 1e-3 * s));
        checks.push(at_most(format!("n={n}: contraction violation (minimizing movement)"), f.contraction_jko, 5e-3 * s));
        checks.push(at_least(format!("n={n}: a priori smallest slack"), f.apriori_slack, -1e-12));
    }
    Ok((rows, checks))
}

struct FlowFacts {
    gap_fine: f64,
    gap_coarse: f64,
    ede_fine: f64,
    ede_coarse: f64,
    contraction_exact: f64,
    contraction_jko: f64,
    apriori_slack: f64,
}

fn flow_one(cfg: &ExperimentConfig, n: usize) -> Result<(Vec<SuiteRow>, FlowFacts)> {
    let (space, graph) = gen_circle(n, 1.0)?;
    let op = LaplaceOperator::new(&graph)?;
    let spec = spectrum(&op, n)?;
    let m = space.mass().to_vec();
    let (mu0, nu0) = two_atom_starts(n);
    let params = JkoParams::default();
    let horizon = 0.13;
    let traces = FLOW_TAUS
        .par_iter()
        .map(|&tau| jko_flow(&mu0, tau, horizon, &space, &graph, &params))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    let mut edes = Vec::new();
    for (tau, tr) in FLOW_TAUS.iter().zip(&traces) {
        let mut worst: f64 = 0.0;
        for &t in &FLOW_TIMES {
            let k = tr.index_of(t).ok_or_else(|| Error::InvalidInput(format!("time {t} off the grid")))?;
            let exact = heat_measure(&spec, &m, &mu0, t);
            let gap = w2(&space, &tr.states[k], &exact)?;
            worst = worst.max(gap);
            rows.push(row("heat-gap", n, format!("tau={tau};t={t}"), "w2", gap));
            rows.push(row("heat-gap", n, format!("tau={tau};t={t}"), "entropy", tr.entropies[k]));
        }
        let ede = ede_residual(tr, &graph);
        rows.push(row("ede", n, format!("tau={tau}"), "max_residual", ede.max_residual()));
        rows.push(row("ede", n, format!("tau={tau}"), "flagged_intervals", ede.flagged.len() as f64));
        gaps.push(worst);
        edes.push(ede.max_residual());
    }
    // contraction on the fine grid
    let fine_tau = FLOW_TAUS[1];
    let other = jko_flow(&nu0, fine_tau, horizon, &space, &graph, &params)?;
    let contraction_jko = contraction_check(&traces[1], &other, &space, 0.0)?;
    let steps = (horizon / 1e-2).round() as usize;
    let exact_states = |start: &[f64]| (0..=steps).map(|k| heat_measure(&spec, &m, start, k as f64 * 1e-2)).collect();
    let ea = FlowTrace::from_states(1e-2, exact_states(&mu0), &space, &graph)?;
    let eb = FlowTrace::from_states(1e-2, exact_states(&nu0), &space, &graph)?;
    let contraction_exact = contraction_check(&ea, &eb, &space, 0.0)?;
    rows.push(row("contraction", n, "exact", "violation", contraction_exact));
    rows.push(row("contraction", n, format!("tau={fine_tau}"), "violation", contraction_jko));
    // a priori estimates from seeded random starts
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.random_starts)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| (-(1.0 - rng.random::<f64>()).ln()).powi(3)).collect();
            let t: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= t);
            v
        })
        .collect();
    let reports = starts
        .par_iter()
        .map(|st| {
            let tr = jko_flow(st, fine_tau, 0.125, &space, &graph, &params)?;
            apriori_check(&tr, &space, &graph, 1.0, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut apriori_slack = f64::INFINITY;
    for (i, r) in reports.iter().enumerate() {
        rows.push(row("apriori", n, format!("start={i}"), "speed_slack", r.speed_slack()));
        rows.push(row("apriori", n, format!("start={i}"), "estimate_slack", r.estimate_slack));
        apriori_slack = apriori_slack.min(r.speed_slack()).min(r.estimate_slack);
    }
    Ok((
        rows,
        FlowFacts {
            gap_fine: gaps[1],
            gap_coarse: gaps[0],
            ede_fine: edes[1],
            ede_coarse: edes[0],
            contraction_exact,
            contraction_jko,
            apriori_slack,
        },
    ))
}

/// `j`-th smallest eigenvalue of `−d²/dx²` on the unit circle: `(2π⌈j/2⌉)²`.
pub(crate) fn circle_eigenvalue(j: usize) -> f64 {
    let k = j.div_ceil(2) as f64;
    (2.0 * std::f64::consts::PI * k).powi(2)
}

fn mosco_spectral(cfg: &ExperimentConfig) -> Result<Output> {
    let s = cfg.tol_scale;
    let circles = cfg.sizes.iter().map(|&n| gen_circle(n, 1.0)).collect::<Result<Vec<_>>>()?;
    let graphs: Vec<_> = circles.iter().map(|(_, g)| g.clone()).collect();
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    let k = 5.min(cfg.sizes[0]);
    let table = eigen_convergence(&graphs, k)?;
    for (c, &n) in cfg.sizes.iter().enumerate() {
        for j in 0..k {
            rows.push(row("eigenvalues", n, j, "lambda", table.columns[c][j]));
            rows.push(row("eigenvalues", n, j, "error", (table.columns[c][j] - circle_eigenvalue(j)).abs()));
        }
        rows.push(row("eigenvalues", n, "all", "minmax_defect", table.minmax[c]));
        checks.push(at_most(format!("n={n}: min-max defect"), table.minmax[c], 1e-6 * s));
    }
    for j in 1..k {
        let errs: Vec<f64> = table.row(j).iter().map(|l| (l - circle_eigenvalue(j)).abs()).collect();
        let worst_ratio = errs.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        checks.push(Check {
            name: format!("lambda_{j}: largest error ratio along the ladder"),
            value: worst_ratio,
            threshold: 1.0,
            passed: errs.windows(2).all(|w| w[1] < w[0]),
        });
        let rel = errs[errs.len() - 1] / circle_eigenvalue(j);
        checks.push(at_most(format!("lambda_{j}: final relative error"), rel, 0.02 * s));
    }

    for (g, &n) in graphs.iter().zip(&cfg.sizes) {
        let q = quadratic_form_check(g, 100, cfg.seed);
        rows.push(row("quadratic-form", n, "trials=100", "max_residual", q));
        checks.push(at_most(format!("n={n}: parallelogram residual"), q, 1e-10 * s));
    }

    // iterated resolvent against exact heat on the circle with 32 points
    let (space32, graph32) = gen_circle(32, 1.0)?;
    let op = LaplaceOperator::new(&graph32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_ratio: f64 = 0.0;
    let t = 0.1;
    for trial in 0..20 {
        let f: Vec<f64> = (0..32).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let exact = heat_semigroup(&op, &f, t, HeatMode::Spectral)?;
        let e = op.energy(&f);
        for ks in [1usize, 4, 16, 64] {
            let approx = heat_semigroup(&op, &f, t, HeatMode::Resolvent { k_steps: ks })?;
            let d: Vec<f64> = approx.iter().zip(&exact).map(|(a, b)| a - b).collect();
            let ratio = op.inner(&d, &d) / (2.0 * e * t / ks as f64);
            worst_ratio = worst_ratio.max(ratio);
            rows.push(row("resolvent-bound", 32, format!("f={trial};k={ks}"), "ratio", ratio));
        }
    }
    checks.push(at_most("iterated resolvent error / 2E(f)t/k", worst_ratio, 1.0));

    let w = wlsti_fit(&space32, &graph32, space32.diameter(), 50, cfg.seed)?;
    rows.push(row("wlsti", 32, format!("A={}", space32.diameter()), "b_lower", w.b));

    // recovery sequences of the first cosine mode of the finest circle
    if cfg.sizes.len() >= 2 {
        let (limit, limit_graph) = circles.last().unwrap();
        let nl = limit.n();
        let f: Vec<f64> = (0..nl).map(|i| (2.0 * std::f64::consts::PI * i as f64 / nl as f64).cos()).collect();
        let couplings = circles[..circles.len() - 1]
            .iter()
            .map(|(sp, _)| {
                let cost = circle_cross_dist(nl, sp.n()).map(|d| d * d);
                let norm = |v: &[f64]| -> Vec<f64> {
                    let t: f64 = v.iter().sum();
                    v.iter().map(|x| x / t).collect()
                };
                optimal_coupling(&norm(limit.mass()), &norm(sp.mass()), &cost).map(|(c, _)| c)
            })
            .collect::<Result<Vec<_>>>()?;
        let stages: Vec<MoscoStage> = circles[..circles.len() - 1]
            .iter()
            .zip(&couplings)
            .map(|((sp, g), c)| MoscoStage { space: sp, graph: g, coupling: c })
            .collect();
        let rep = mosco_diagnostic(limit, limit_graph, &f, &stages, 1e-9)?;
        for r in &rep.rows {
            rows.push(row("mosco", r.nodes, format!("limit={nl}"), "energy_gap", r.energy_gap));
            rows.push(row("mosco", r.nodes, format!("limit={nl}"), "norm_gap", r.norm_gap));
            rows.push(row("mosco", r.nodes, format!("limit={nl}"), "test_gap", r.test_gap));
            rows.push(row("mosco", r.nodes, format!("limit={nl}"), "liminf_min", r.liminf_min));
        }
        let gaps: Vec<f64> = rep.rows.iter().map(|r| r.energy_gap).collect();
        let rise = gaps.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        if gaps.len() >= 2 {
            checks.push(at_most("mosco energy gap: largest increase along the ladder", rise, 0.0));
        }
    }
    Ok((rows, checks))
}
