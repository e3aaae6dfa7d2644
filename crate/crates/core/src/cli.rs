//! Command-line harness: instance generation, single solves, reference
//! solves and benchmark sweeps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dc_admm::dc_run;
use crate::diagnostics::{write_trace_csv, Algorithm, ConvergenceTrace};
use crate::error::{Error, Result};
use crate::fmt::{sig17, Sig17};
use crate::netgraph::Graph;
use crate::oracle::{reference_solve, DEFAULT_ORACLE_TOL};
use crate::pdc_admm::{pdc_run, SolverConfig};
use crate::problem::{make_constrained_lasso, make_load_control, CoupledProblem};
use crate::randomized::{rpdc_run, ActivityModel};

/// Environment variable capping the bench worker threads.
pub const THREADS_ENV: &str = "DCMESH_THREADS";

/// Exit code of `solve` when the iteration cap is reached before the stop rule.
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "dcmesh", version, about = "Distributed consensus ADMM over simulated agent networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random problem instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance over a generated or given graph.
    Solve(SolveArgs),
    /// Compute a high-accuracy reference solution.
    Oracle(OracleArgs),
    /// Run a sweep of instances x algorithms x seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Lasso,
    Loadcontrol,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: InstanceKind,
    /// Number of agents, not counting the slack agent.
    #[arg(long)]
    pub agents: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub l: usize,
    #[arg(long)]
    pub p: usize,
    /// l1 weight (lasso only).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Pdc,
    Dc,
    Rpdc,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Pdc => Algorithm::Pdc,
            AlgorithmArg::Dc => Algorithm::Dc,
            AlgorithmArg::Rpdc => Algorithm::Rpdc,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "pdc")]
    pub algorithm: AlgorithmArg,
    /// Graph JSON `{"n": .., "edges": [[i, j], ..]}`; overrides the random graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub graph_seed: u64,
    #[arg(long, default_value_t = 0.4)]
    pub edge_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Defaults to `c`.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_inner: f64,
    #[arg(long, default_value_t = 1.01)]
    pub beta_factor: f64,
    #[arg(long, default_value_t = 5.0)]
    pub c1: f64,
    #[arg(long, default_value_t = crate::subsolvers::DEFAULT_INNER_CAP)]
    pub inner_cap: usize,
    /// Agent ON probability (rpdc).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Link failure probability (rpdc).
    #[arg(long)]
    pub pe: Option<f64>,
    /// Activity seed (rpdc).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub stop_tol: f64,
    /// Reference objective; without it the residual stop rule is used.
    #[arg(long)]
    pub obj_star: Option<f64>,
    #[arg(long)]
    pub trace_out: PathBuf,
    /// Defaults to the trace path with a `.json` extension.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    /// Check the runtime invariants every iteration.
    #[arg(long)]
    pub debug: bool,
    /// Update agents on worker threads.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub problem: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORACLE_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<CoupledProblem> {
    let gen = match args.kind {
        InstanceKind::Lasso => make_constrained_lasso(args.agents, args.k, args.l, args.p, args.lambda, args.seed)?,
        InstanceKind::Loadcontrol => make_load_control(args.agents, args.k, args.l, args.p, args.seed)?,
    };
    gen.problem.save(&args.out)?;
    let p = gen.problem;
    println!(
        "wrote {}: N = {}, L = {}, sum K = {}, sum P = {}",
        args.out.display(),
        p.n_agents(),
        p.l(),
        p.total_k(),
        p.total_p()
    );
    Ok(p)
}

pub fn load_graph(path: &Path) -> Result<Graph> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

fn solver_config(args: &SolveArgs) -> SolverConfig {
    SolverConfig {
        c: args.c,
        tau: args.tau,
        eps_inner: args.eps_inner,
        beta_factor: args.beta_factor,
        c1: args.c1,
        inner_cap: args.inner_cap,
        max_outer: args.max_iters,
        stop_tol: args.stop_tol,
        seed: args.seed,
        debug: args.debug,
        parallel: args.parallel,
        ..Default::default()
    }
}

/// Runs `algorithm`; `activity` is required for the randomized method.
pub fn run_algorithm(
    algorithm: Algorithm,
    problem: &CoupledProblem,
    graph: &Graph,
    cfg: &SolverConfig,
    activity: Option<&ActivityModel>,
    obj_star: Option<f64>,
) -> Result<ConvergenceTrace> {
    match algorithm {
        Algorithm::Pdc => pdc_run(problem, graph, cfg, obj_star),
        Algorithm::Dc => dc_run(problem, graph, cfg, obj_star),
        Algorithm::Rpdc => {
            let m = activity.ok_or_else(|| Error::InvalidArgument("rpdc needs --alpha and --pe".into()))?;
            rpdc_run(problem, graph, cfg, m, obj_star)
        }
    }
}

/// Solves and writes the trace CSV and summary JSON. Returns the trace.
pub fn cmd_solve(args: &SolveArgs) -> Result<ConvergenceTrace> {
    let problem = CoupledProblem::load(&args.problem)?;
    let n = problem.n_agents();
    let graph = match &args.graph {
        Some(path) => load_graph(path)?,
        None => Graph::random_connected(n, args.edge_prob, args.graph_seed)?,
    };
    let algorithm = Algorithm::from(args.algorithm);
    let activity = match (algorithm, args.alpha, args.pe) {
        (Algorithm::Rpdc, Some(a), Some(pe)) => Some(ActivityModel::uniform(n, a, pe)),
        (Algorithm::Rpdc, _, _) => return Err(Error::InvalidArgument("rpdc needs --alpha and --pe".into())),
        _ => None,
    };
    let cfg = solver_config(args);
    let mut trace = run_algorithm(algorithm, &problem, &graph, &cfg, activity.as_ref(), args.obj_star)?;
    if args.graph.is_none() {
        trace.metadata.insert("graph_seed".into(), args.graph_seed.into());
        trace.metadata.insert("edge_prob".into(), args.edge_prob.into());
    }
    write_file(&args.trace_out, |w| write_trace_csv(&trace, w))?;
    let summary_path = args.summary_out.clone().unwrap_or_else(|| args.trace_out.with_extension("json"));
    let summary = trace.summary();
    write_file(&summary_path, |w| Ok(w.write_all(summary.to_json()?.as_bytes())?))?;
    let final_acc = summary.final_acc.map_or("n/a".to_string(), |a| format!("{:.3e}", a.0));
    println!(
        "{}: {} iterations, {:?}, acc {}, feas {:.3e}, wall {:.3}s",
        algorithm.name(),
        summary.iterations,
        summary.stop_reason,
        final_acc,
        summary.final_feas.map_or(f64::NAN, |f| f.0),
        summary.wall_time.0
    );
    if let Some(dbg) = &trace.debug {
        if !dbg.passed() {
            log::warn!("invariant checks failed: {}", dbg.failures().join(", "));
        }
    }
    Ok(trace)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OracleOutput {
    pub obj_star: Sig17,
    pub kkt: Sig17,
    pub x: Vec<Vec<Sig17>>,
    pub converged: bool,
    pub iterations: usize,
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleOutput> {
    let problem = CoupledProblem::load(&args.problem)?;
    let sol = reference_solve(&problem, args.tol)?;
    let out = OracleOutput {
        obj_star: Sig17(sol.obj_star),
        kkt: Sig17(sol.kkt),
        x: sol.point.x.iter().map(|x| crate::fmt::wrap(x.iter().copied())).collect(),
        converged: sol.converged,
        iterations: sol.iterations,
    };
    write_file(&args.out, |w| Ok(serde_json::to_writer_pretty(w, &out)?))?;
    println!("obj* = {}, kkt = {:.3e}, converged = {}", sig17(sol.obj_star), sol.kkt, sol.converged);
    Ok(out)
}

/// One instance family of a sweep; the cell seed picks the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSpec {
    Lasso {
        agents: usize,
        k: usize,
        l: usize,
        p: usize,
        lambda: f64,
    },
    Loadcontrol {
        agents: usize,
        k: usize,
        l: usize,
        p: usize,
    },
    /// A fixed instance; the seed then only changes the graph and activity.
    File {
        path: PathBuf,
    },
}

impl InstanceSpec {
    pub fn build(&self, seed: u64) -> Result<CoupledProblem> {
        Ok(match self {
            InstanceSpec::Lasso { agents, k, l, p, lambda } => {
                make_constrained_lasso(*agents, *k, *l, *p, *lambda, seed)?.problem
            }
            InstanceSpec::Loadcontrol { agents, k, l, p } => make_load_control(*agents, *k, *l, *p, seed)?.problem,
            InstanceSpec::File { path } => CoupledProblem::load(path)?,
        })
    }

    pub fn label(&self) -> String {
        match self {
            InstanceSpec::Lasso { agents, k, l, p, lambda } => format!("lasso-N{agents}-K{k}-L{l}-P{p}-lam{lambda}"),
            InstanceSpec::Loadcontrol { agents, k, l, p } => format!("loadcontrol-N{agents}-K{k}-L{l}-P{p}"),
            InstanceSpec::File { path } => path.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSettings {
    #[serde(flatten)]
    pub solver: SolverConfig,
    pub edge_prob: f64,
    /// Activity model for rpdc cells.
    pub alpha: f64,
    pub pe: f64,
    pub oracle_tol: f64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), edge_prob: 0.4, alpha: 1.0, pe: 0.0, oracle_tol: DEFAULT_ORACLE_TOL }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub instances: Vec<InstanceSpec>,
    pub algorithms: Vec<Algorithm>,
    pub settings: BenchSettings,
    pub seeds: Vec<u64>,
}

/// Outcome of one (instance, algorithm, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub instance: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: std::result::Result<CellStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub iterations: usize,
    pub converged: bool,
    pub acc: f64,
    pub feas: f64,
    pub wall_time: f64,
    pub inner_time: f64,
    pub inner_time_per_agent: f64,
}

fn run_cell(cfg: &SweepConfig, instance: usize, seed: u64, algorithms: &[Algorithm]) -> Vec<CellResult> {
    let fail = |msg: String| {
        algorithms
            .iter()
            .map(|&algorithm| CellResult { instance, algorithm, seed, outcome: Err(msg.clone()) })
            .collect::<Vec<_>>()
    };
    let s = &cfg.settings;
    let prepared = (|| -> Result<_> {
        let problem = cfg.instances[instance].build(seed)?;
        let graph = Graph::random_connected(problem.n_agents(), s.edge_prob, seed)?;
        let oracle = reference_solve(&problem, s.oracle_tol)?;
        if !oracle.converged {
            return Err(Error::InvalidArgument(format!(
                "oracle did not reach {:e} (kkt {:e})",
                s.oracle_tol, oracle.kkt
            )));
        }
        Ok((problem, graph, oracle.obj_star))
    })();
    let (problem, graph, obj_star) = match prepared {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let activity = ActivityModel::uniform(problem.n_agents(), s.alpha, s.pe);
    let solver = SolverConfig { seed, ..s.solver.clone() };
    algorithms
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let outcome = run_algorithm(algorithm, &problem, &graph, &solver, Some(&activity), Some(obj_star))
                .map(|t| {
                    let last = t.final_row();
                    CellStats {
                        iterations: t.iterations(),
                        converged: t.stop.converged(),
                        acc: last.and_then(|r| r.acc).map_or(f64::NAN, f64::abs),
                        feas: last.map_or(f64::NAN, |r| r.feas),
                        wall_time: start.elapsed().as_secs_f64(),
                        inner_time: t.inner_time(),
                        inner_time_per_agent: t.inner_time() / problem.n_agents() as f64,
                    }
                })
                .map_err(|e| e.to_string());
            CellResult { instance, algorithm, seed, outcome }
        })
        .collect()
}

/// Worker count from `DCMESH_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every cell of the sweep, in parallel across cells.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<CellResult>> {
    let jobs: Vec<(usize, u64)> =
        (0..cfg.instances.len()).flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let nested: Vec<Vec<CellResult>> =
        pool.install(|| jobs.par_iter().map(|&(i, s)| run_cell(cfg, i, s, &cfg.algorithms)).collect());
    Ok(nested.into_iter().flatten().collect())
}

const AGGREGATE_HEADER: [&str; 9] =
    ["instance", "algorithm", "cells", "failures", "converged", "mean_iterations", "mean_acc", "mean_feas", "max_feas"];
const TIMING_HEADER: [&str; 6] =
    ["instance", "algorithm", "cells", "mean_wall_time_s", "mean_inner_time_s", "mean_inner_time_per_agent_s"];
const CELL_HEADER: [&str; 11] = [
    "instance",
    "algorithm",
    "seed",
    "status",
    "iterations",
    "converged",
    "acc",
    "feas",
    "wall_time_s",
    "inner_time_s",
    "inner_time_per_agent_s",
];

/// Mean formatted for CSV; empty when there is nothing to average.
fn mean(v: impl Iterator<Item = f64>) -> String {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        String::new()
    } else {
        sig17(s / n as f64)
    }
}

/// Writes `aggregate.csv` (deterministic columns), `timing.csv` and `cells.csv`.
pub fn write_sweep(cfg: &SweepConfig, cells: &[CellResult], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut agg = csv::Writer::from_path(out_dir.join("aggregate.csv"))?;
    let mut timing = csv::Writer::from_path(out_dir.join("timing.csv"))?;
    let mut per_cell = csv::Writer::from_path(out_dir.join("cells.csv"))?;
    agg.write_record(AGGREGATE_HEADER)?;
    timing.write_record(TIMING_HEADER)?;
    per_cell.write_record(CELL_HEADER)?;

    for (i, spec) in cfg.instances.iter().enumerate() {
        for &alg in &cfg.algorithms {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.instance == i && c.algorithm == alg).collect();
            let ok: Vec<&CellStats> = group.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let label = spec.label();
            agg.write_record([
                label.clone(),
                alg.name().to_string(),
                group.len().to_string(),
                (group.len() - ok.len()).to_string(),
                ok.iter().filter(|s| s.converged).count().to_string(),
                mean(ok.iter().map(|s| s.iterations as f64)),
                mean(ok.iter().map(|s| s.acc)),
                mean(ok.iter().map(|s| s.feas)),
                ok.iter().map(|s| s.feas).reduce(f64::max).map_or(String::new(), sig17),
            ])?;
            timing.write_record([
                label,
                alg.name().to_string(),
                group.len().to_string(),
                mean(ok.iter().map(|s| s.wall_time)),
                mean(ok.iter().map(|s| s.inner_time)),
                mean(ok.iter().map(|s| s.inner_time_per_agent)),
            ])?;
        }
    }
    for c in cells {
        let label = cfg.instances[c.instance].label();
        let head = [label, c.algorithm.name().to_string(), c.seed.to_string()];
        let tail: Vec<String> = match &c.outcome {
            Ok(s) => vec![
                "ok".into(),
                s.iterations.to_string(),
                s.converged.to_string(),
                sig17(s.acc),
                sig17(s.feas),
                sig17(s.wall_time),
                sig17(s.inner_time),
                sig17(s.inner_time_per_agent),
            ],
            Err(e) => {
                let mut v = vec![format!("error: {e}")];
                v.extend(std::iter::repeat_n(String::new(), 7));
                v
            }
        };
        per_cell.write_record(head.iter().chain(&tail))?;
    }
    agg.flush()?;
    timing.flush()?;
    per_cell.flush()?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<CellResult>> {
    let cfg: SweepConfig = serde_json::from_reader(std::io::BufReader::new(File::open(&args.config)?))?;
    // per-agent tau lengths are checked per cell, once the instance exists
    SolverConfig { tau_per_agent: None, ..cfg.settings.solver.clone() }.validate(0)?;
    let cells = run_sweep(&cfg)?;
    write_sweep(&cfg, &cells, &args.out_dir)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells, {} failed; results in {}", cells.len(), failed, args.out_dir.display());
    Ok(cells)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| 0),
        Command::Solve(a) => cmd_solve(a).map(|t| if t.stop.converged() { 0 } else { EXIT_NOT_CONVERGED }),
        Command::Oracle(a) => cmd_oracle(a).map(|o| if o.converged { 0 } else { EXIT_NOT_CONVERGED }),
        Command::Bench(a) => cmd_bench(a).map(|_| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from([
            "dcmesh",
            "solve",
            "p.json",
            "--algorithm",
            "rpdc",
            "--alpha",
            "0.7",
            "--pe",
            "0.5",
            "--c",
            "0.05",
            "--tau",
            "0.05",
            "--eps-inner",
            "1e-5",
            "--trace-out",
            "t.csv",
        ])
        .unwrap();
        let Command::Solve(a) = cli.command else { panic!("expected solve") };
        assert_eq!(a.algorithm, AlgorithmArg::Rpdc);
        assert_eq!(a.tau, Some(0.05));
        assert_eq!(a.eps_inner, 1e-5);
    }

    #[test]
    fn sweep_config_parses_with_defaults() {
        let cfg: SweepConfig = serde_json::from_str(
            r#"{"instances": [{"kind": "lasso", "agents": 2, "k": 3, "l": 2, "p": 2, "lambda": 1.0}],
                "algorithms": ["pdc", "dc"], "settings": {"c": 0.5, "edge_prob": 0.7}, "seeds": [1, 2]}"#,
        )
        .unwrap();
        assert_eq!(cfg.settings.solver.c, 0.5);
        assert_eq!(cfg.settings.solver.beta_factor, 1.01);
        assert_eq!(cfg.settings.edge_prob, 0.7);
        assert_eq!(cfg.algorithms, vec![Algorithm::Pdc, Algorithm::Dc]);
        let empty: SweepConfig = serde_json::from_str("{}").unwrap();
        assert!(empty.instances.is_empty());
    }
}
