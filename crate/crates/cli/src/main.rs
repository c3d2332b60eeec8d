use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mmgeo::entropyflow::{ede_residual, jko_flow, GraphDirichlet, JkoParams};
use mmgeo::gromov::{
    cyl_discrepancy, dpsi, pgw, reconstruction_test, PgwMode, SearchConfig, DEFAULT_CYL_ATOM_CAP,
};
use mmgeo::lab::{
    circle_cross_dist, gen_circle, pmgh_compare, run_suite, ExperimentConfig, SuiteKind,
};
use mmgeo::space::{load_space, validate, FinitePmmSpace, WeightSpec, DEFAULT_ISO_CAP};
use mmgeo::spectral::{
    eigen_convergence, heat_semigroup, mosco_diagnostic, spectrum, HeatMode, LaplaceOperator, MoscoStage,
};
use mmgeo::transport::{optimal_coupling, sinkhorn, squared, w2, wc, ConcaveCost};

#[derive(Parser)]
#[command(name = "mmgeo", version, about = "Distances, heat flows and spectra on finite pointed metric measure spaces")]
struct Cli {
    /// Seed for every randomized search or sample.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance where a command has one (isomorphism matching, flow KKT residual).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file (directory for `suite`); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostName {
    Min1,
    Tanh,
}

impl CostName {
    fn cost(self) -> ConcaveCost {
        match self {
            CostName::Min1 => ConcaveCost::min1(),
            CostName::Tanh => ConcaveCost::tanh(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeName {
    Exact,
    Bracket,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeatModeName {
    Resolvent,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Convergence,
    Flow,
    MoscoSpectral,
}

#[derive(clap::Args)]
struct Pair {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(clap::Args)]
struct Measures {
    #[arg(long)]
    space: PathBuf,
    /// `uniform`, `mass` (normalized reference measure), `dirac:i`, or a JSON array file.
    #[arg(long)]
    mu: String,
    #[arg(long)]
    nu: String,
}

#[derive(clap::Args)]
struct GraphArgs {
    #[arg(long)]
    space: PathBuf,
    /// Neighbourhood radius; defaults to the smallest positive distance.
    #[arg(long)]
    eps_graph: Option<f64>,
    /// Dimension used to calibrate the graph weights.
    #[arg(long, default_value_t = 1.0)]
    dim: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the metric and measure invariants of a space file.
    Validate {
        #[arg(long)]
        space: PathBuf,
    },
    /// Quadratic Wasserstein distance between two measures on one space.
    W2(Measures),
    /// Transport distance for a bounded concave cost.
    Wc {
        #[command(flatten)]
        m: Measures,
        #[arg(long, value_enum, default_value_t = CostName::Min1)]
        cost: CostName,
    },
    /// Entropic transport cost (log-domain Sinkhorn, quadratic cost).
    Sinkhorn {
        #[command(flatten)]
        m: Measures,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
    /// Bracket for the weighted Sturm-type distance.
    Dpsi {
        #[command(flatten)]
        pair: Pair,
        /// `cubic-tail`, `gaussian:c` or `constant:c`.
        #[arg(long, default_value = "cubic-tail")]
        psi: String,
    },
    /// Bracket for the pointed Gromov-weak distance, with per-scale terms.
    Pgw {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_enum, default_value_t = ModeName::Bracket)]
        mode: ModeName,
        #[arg(long, value_enum, default_value_t = CostName::Min1)]
        cost: CostName,
        #[arg(long, requires = "k_max")]
        k_min: Option<i32>,
        #[arg(long, requires = "k_min")]
        k_max: Option<i32>,
    },
    /// Discrepancy between order-N cylindrical measures.
    Cyl {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, value_enum, default_value_t = CostName::Min1)]
        cost: CostName,
    },
    /// Compare cylindrical measures up to an order and search for an isomorphism.
    Recon {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 3)]
        n_max: usize,
    },
    /// Minimizing-movement entropy flow; emits the trace.
    Jko {
        #[command(flatten)]
        g: GraphArgs,
        /// `dirac:i`, `uniform`, or a JSON array file.
        #[arg(long)]
        start: String,
        #[arg(long)]
        tau: f64,
        #[arg(long = "T")]
        t_end: f64,
    },
    /// Heat semigroup applied to a function (JSON array file).
    Heat {
        #[command(flatten)]
        g: GraphArgs,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 16)]
        k_steps: usize,
        #[arg(long, value_enum, default_value_t = HeatModeName::Spectral)]
        mode: HeatModeName,
    },
    /// Lowest eigenpairs of the graph Laplacian.
    Spectrum {
        #[command(flatten)]
        g: GraphArgs,
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
    /// Recovery-sequence diagnostic for the first cosine mode along circle refinements.
    Mosco {
        /// Circle sizes; the last is the limit.
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
        sizes: Vec<usize>,
    },
    /// Eigenvalue table along circle refinements or a list of space files.
    Eigconv {
        #[arg(long, value_delimiter = ',', default_values_t = [16usize, 32, 64, 128])]
        sizes: Vec<usize>,
        /// Space files instead of circles (graphs from their smallest positive distance).
        #[arg(long, value_delimiter = ',')]
        spaces: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Bracket for the pointed measured Gromov–Hausdorff-type epsilon.
    Pmgh {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_delimiter = ',')]
        eps_grid: Vec<f64>,
    },
    /// Run an experiment suite; exit status reports its checks.
    Suite {
        #[arg(long, value_enum)]
        name: SuiteName,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 20)]
        random_starts: usize,
    },
}

/// A command's result: JSON always, CSV when the data is tabular.
struct Output {
    json: Value,
    csv: Option<String>,
    ok: bool,
}

impl Output {
    fn json(json: Value) -> Self {
        Self { json, csv: None, ok: true }
    }
}

fn measure(spec: &str, space: &FinitePmmSpace) -> Result<Vec<f64>> {
    let n = space.n();
    let v = if spec == "uniform" {
        vec![1.0 / n as f64; n]
    } else if spec == "mass" {
        let t = space.total_mass();
        space.mass().iter().map(|m| m / t).collect()
    } else if let Some(i) = spec.strip_prefix("dirac:") {
        let i: usize = i.parse().context("dirac index")?;
        if i >= n {
            bail!("dirac index {i} out of range for {n} points");
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    } else {
        read_vector(Path::new(spec))?
    };
    if v.len() != n {
        bail!("measure has {} entries, space has {n} points", v.len());
    }
    Ok(v)
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn load(path: &Path) -> Result<FinitePmmSpace> {
    load_space(path).with_context(|| format!("loading {}", path.display()))
}

fn graph_for(space: &FinitePmmSpace, eps: Option<f64>, dim: f64) -> Result<GraphDirichlet> {
    let eps = match eps {
        Some(e) => e,
        None => {
            let supp = space.support();
            let mut best = f64::INFINITY;
            for &i in &supp {
                for &j in &supp {
                    let d = space.d(i, j);
                    if d > 0.0 {
                        best = best.min(d);
                    }
                }
            }
            if !best.is_finite() {
                bail!("space has no two distinct support points; pass --eps-graph");
            }
            best
        }
    };
    Ok(GraphDirichlet::eps_graph(space, eps, dim)?)
}

fn psi(spec: &str) -> Result<WeightSpec> {
    if spec == "cubic-tail" {
        return Ok(WeightSpec::cubic_tail());
    }
    let (kind, c) = spec.split_once(':').ok_or_else(|| anyhow!("unknown weight {spec}"))?;
    let c: f64 = c.parse()?;
    match kind {
        "gaussian" => Ok(WeightSpec::gaussian(c)),
        "constant" => Ok(WeightSpec::constant(c)),
        _ => bail!("unknown weight {spec}"),
    }
}

fn bracket_json(b: &mmgeo::gromov::DistanceBracket) -> Value {
    json!({"lower": b.lower, "upper": b.upper, "lower_method": b.lower_method, "upper_method": b.upper_method})
}

fn vector_csv(header: &str, v: &[f64]) -> String {
    let mut s = format!("index,{header}\n");
    for (i, x) in v.iter().enumerate() {
        s.push_str(&format!("{i},{x}\n"));
    }
    s
}

fn run(cli: &Cli) -> Result<Output> {
    let search = SearchConfig { seed: cli.seed, ..SearchConfig::default() };
    match &cli.cmd {
        Cmd::Validate { space } => {
            let s = load(space)?;
            let rep = validate(&s);
            let violations: Vec<String> = rep.violations.iter().map(|v| format!("{v:?}")).collect();
            Ok(Output { json: json!({"n": s.n(), "valid": rep.is_valid(), "violations": violations}), csv: None, ok: rep.is_valid() })
        }
        Cmd::W2(m) => {
            let s = load(&m.space)?;
            let v = w2(&s, &measure(&m.mu, &s)?, &measure(&m.nu, &s)?)?;
            Ok(Output::json(json!({"w2": v})))
        }
        Cmd::Wc { m, cost } => {
            let s = load(&m.space)?;
            let c = cost.cost();
            let v = wc(&s, &measure(&m.mu, &s)?, &measure(&m.nu, &s)?, &c)?;
            Ok(Output::json(json!({"wc": v, "cost": c.name()})))
        }
        Cmd::Sinkhorn { m, eps, max_iter } => {
            let s = load(&m.space)?;
            let (v, _, rep) = sinkhorn(&measure(&m.mu, &s)?, &measure(&m.nu, &s)?, &squared(s.dist()), *eps, *max_iter)?;
            Ok(Output::json(json!({
                "cost": v, "iterations": rep.iterations, "marginal_error": rep.marginal_error, "converged": rep.converged
            })))
        }
        Cmd::Dpsi { pair, psi: p } => {
            let b = dpsi(&load(&pair.a)?, &load(&pair.b)?, &psi(p)?, &search)?;
            Ok(Output::json(bracket_json(&b)))
        }
        Cmd::Pgw { pair, mode, cost, k_min, k_max } => {
            let mode = match mode {
                ModeName::Exact => PgwMode::ExactTiny,
                ModeName::Bracket => PgwMode::Bracket,
            };
            let range = k_min.zip(*k_max);
            let (b, terms) = pgw(&load(&pair.a)?, &load(&pair.b)?, range, mode, &cost.cost(), &search)?;
            let mut csv = String::from("k,weight,lower,upper\n");
            for t in &terms {
                csv.push_str(&format!("{},{},{},{}\n", t.k, t.weight, t.bracket.lower, t.bracket.upper));
            }
            let terms: Vec<Value> = terms
                .iter()
                .map(|t| json!({"k": t.k, "weight": t.weight, "lower": t.bracket.lower, "upper": t.bracket.upper}))
                .collect();
            Ok(Output { json: json!({"bracket": bracket_json(&b), "terms": terms}), csv: Some(csv), ok: true })
        }
        Cmd::Cyl { pair, order, cost } => {
            let v = cyl_discrepancy(&load(&pair.a)?, &load(&pair.b)?, *order, &cost.cost(), DEFAULT_CYL_ATOM_CAP)?;
            Ok(Output::json(json!({"order": order, "discrepancy": v})))
        }
        Cmd::Recon { pair, n_max } => {
            let r = reconstruction_test(&load(&pair.a)?, &load(&pair.b)?, *n_max, cli.tol.unwrap_or(1e-12), DEFAULT_ISO_CAP)?;
            Ok(Output::json(json!({
                "first_difference": r.first_difference,
                "checked_up_to": r.checked_up_to,
                "cyl_equal": r.cyl_equal(),
                "isomorphic": r.iso.is_isomorphic(),
                "iso": format!("{:?}", r.iso),
            })))
        }
        Cmd::Jko { g, start, tau, t_end } => {
            let s = load(&g.space)?;
            let graph = graph_for(&s, g.eps_graph, g.dim)?;
            let params = JkoParams { tol: cli.tol.unwrap_or(JkoParams::default().tol), ..JkoParams::default() };
            let mu0 = if start == "uniform" { measure("mass", &s)? } else { measure(start, &s)? };
            let tr = jko_flow(&mu0, *tau, *t_end, &s, &graph, &params)?;
            let ede = ede_residual(&tr, &graph);
            let rows: Vec<Value> = (0..tr.len())
                .map(|k| {
                    json!({
                        "time": tr.times[k],
                        "entropy": tr.entropies[k],
                        "speed": tr.step_w2.get(k).map(|w| w / tr.tau),
                        "fisher": tr.fisher[k],
                        "residual": ede.residuals.get(k),
                    })
                })
                .collect();
            Ok(Output { json: json!({"tau": tr.tau, "trace": rows}), csv: Some(tr.to_csv(&ede.residuals)), ok: true })
        }
        Cmd::Heat { g, f, t, k_steps, mode } => {
            let s = load(&g.space)?;
            let op = LaplaceOperator::new(&graph_for(&s, g.eps_graph, g.dim)?)?;
            let f = read_vector(f)?;
            let mode = match mode {
                HeatModeName::Resolvent => HeatMode::Resolvent { k_steps: *k_steps },
                HeatModeName::Spectral => HeatMode::Spectral,
            };
            let h = heat_semigroup(&op, &f, *t, mode)?;
            Ok(Output { csv: Some(vector_csv("value", &h)), json: json!({"t": t, "values": h}), ok: true })
        }
        Cmd::Spectrum { g, k } => {
            let s = load(&g.space)?;
            let op = LaplaceOperator::new(&graph_for(&s, g.eps_graph, g.dim)?)?;
            let spec = spectrum(&op, (*k).min(op.n()))?;
            let mut csv = String::from("index,eigenvalue,residual\n");
            for (j, (l, r)) in spec.eigenvalues.iter().zip(&spec.residuals).enumerate() {
                csv.push_str(&format!("{j},{l},{r}\n"));
            }
            Ok(Output {
                json: json!({
                    "eigenvalues": spec.eigenvalues,
                    "residuals": spec.residuals,
                    "components": spec.components,
                    "degenerate_kernel": spec.degenerate_kernel(),
                }),
                csv: Some(csv),
                ok: true,
            })
        }
        Cmd::Mosco { sizes } => {
            if sizes.len() < 2 {
                bail!("need at least two sizes");
            }
            let circles = sizes.iter().map(|&n| gen_circle(n, 1.0)).collect::<mmgeo::Result<Vec<_>>>()?;
            let (limit, lg) = circles.last().unwrap();
            let nl = limit.n();
            let f: Vec<f64> = (0..nl).map(|i| (2.0 * std::f64::consts::PI * i as f64 / nl as f64).cos()).collect();
            let couplings = circles[..circles.len() - 1]
                .iter()
                .map(|(s, _)| {
                    let cost = circle_cross_dist(nl, s.n()).map(|d| d * d);
                    optimal_coupling(&vec![1.0 / nl as f64; nl], &vec![1.0 / s.n() as f64; s.n()], &cost).map(|(c, _)| c)
                })
                .collect::<mmgeo::Result<Vec<_>>>()?;
            let stages: Vec<MoscoStage> = circles[..circles.len() - 1]
                .iter()
                .zip(&couplings)
                .map(|((s, g), c)| MoscoStage { space: s, graph: g, coupling: c })
                .collect();
            let rep = mosco_diagnostic(limit, lg, &f, &stages, cli.tol.unwrap_or(1e-9))?;
            let mut csv = String::from("nodes,energy_gap,norm_gap,test_gap,liminf_min,liminf_flag\n");
            let mut rows = Vec::new();
            for r in &rep.rows {
                csv.push_str(&format!("{},{},{},{},{},{}\n", r.nodes, r.energy_gap, r.norm_gap, r.test_gap, r.liminf_min, r.liminf_flag));
                rows.push(json!({
                    "nodes": r.nodes, "energy_gap": r.energy_gap, "norm_gap": r.norm_gap,
                    "test_gap": r.test_gap, "liminf_min": r.liminf_min, "liminf_flag": r.liminf_flag
                }));
            }
            Ok(Output { json: json!({"limit_energy": rep.limit_energy, "rows": rows}), csv: Some(csv), ok: true })
        }
        Cmd::Eigconv { sizes, spaces, k } => {
            let (labels, graphs): (Vec<String>, Vec<GraphDirichlet>) = if spaces.is_empty() {
                sizes
                    .iter()
                    .map(|&n| gen_circle(n, 1.0).map(|(_, g)| (format!("circle{n}"), g)))
                    .collect::<mmgeo::Result<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            } else {
                spaces
                    .iter()
                    .map(|p| Ok((p.display().to_string(), graph_for(&load(p)?, None, 1.0)?)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .unzip()
            };
            let table = eigen_convergence(&graphs, *k)?;
            let mut csv = format!("j,{}\n", labels.join(","));
            for j in 0..*k {
                let vals: Vec<String> = table.row(j).iter().map(|x| x.to_string()).collect();
                csv.push_str(&format!("{j},{}\n", vals.join(",")));
            }
            Ok(Output {
                json: json!({
                    "columns": labels, "eigenvalues": table.columns, "minmax_defect": table.minmax,
                    "degenerate_kernel": table.degenerate_kernel
                }),
                csv: Some(csv),
                ok: true,
            })
        }
        Cmd::Pmgh { pair, eps_grid } => {
            let r = pmgh_compare(&load(&pair.a)?, &load(&pair.b)?, eps_grid)?;
            let grid: Vec<Value> = r.grid.iter().map(|(e, s)| json!({"eps": e, "feasible": s})).collect();
            Ok(Output::json(json!({
                "lower": r.lower, "lower_method": r.lower_method, "upper": r.upper,
                "local_search": r.local_search, "smallest_feasible": r.smallest_feasible(), "grid": grid
            })))
        }
        Cmd::Suite { name, sizes, random_starts } => {
            let kind = match name {
                SuiteName::Convergence => SuiteKind::Convergence,
                SuiteName::Flow => SuiteKind::Flow,
                SuiteName::MoscoSpectral => SuiteKind::MoscoSpectral,
            };
            let mut cfg = ExperimentConfig::new(kind);
            cfg.seed = cli.seed;
            cfg.out = cli.out.clone();
            cfg.random_starts = *random_starts;
            if let Some(s) = sizes {
                cfg.sizes = s.clone();
            }
            if let Some(t) = cli.tol {
                cfg.tol_scale = t;
            }
            let a = run_suite(&cfg)?;
            Ok(Output { json: serde_json::from_str(&a.json)?, csv: Some(a.csv), ok: a.summary.passed })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("MMGEO_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("ignoring MMGEO_THREADS={t}"),
        }
    }
    let out = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let text = match (cli.format, &out.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        (Format::Csv, None) => {
            // scalar results: one header row, one value row
            let obj = out.json.as_object().cloned().unwrap_or_default();
            let keys: Vec<&String> = obj.keys().collect();
            let vals: Vec<String> = obj.values().map(|v| v.to_string()).collect();
            format!("{}\n{}\n", keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","), vals.join(","))
        }
        (Format::Json, _) => format!("{}\n", serde_json::to_string_pretty(&out.json).unwrap()),
    };
    // suites write their own artifacts into --out
    match (&cli.out, &cli.cmd) {
        (Some(path), cmd) if !matches!(cmd, Cmd::Suite { .. }) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        _ => print!("{text}"),
    }
    if out.ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
