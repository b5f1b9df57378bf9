use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use decopt::framework::{AlgorithmConfig, InnerSolver, InnerStop, Problem, Runner};
use decopt::gossip::Metric;
use decopt::simulator::{regime_sweep, SweepEntry};
use decopt::topology::{
    build_graph, laplacian, load_edge_list, parse_dense_matrix, spectrum, support_graph, validate, GraphKind,
    MixingMatrix,
};

use crate::config::{default_rho, ExperimentConfig};
use crate::error::CliError;

pub struct Options {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Rho,
    TInner,
}

impl Axis {
    fn as_str(self) -> &'static str {
        match self {
            Axis::Rho => "rho",
            Axis::TInner => "t_inner",
        }
    }
}

/// Number of `(algorithm, tau)` pairs that failed.
pub struct Report {
    pub failed: usize,
}

fn out_dir(cfg: &ExperimentConfig, opts: &Options) -> PathBuf {
    opts.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("results"))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

fn sweep(
    problem: &Problem,
    configs: &[(String, AlgorithmConfig)],
    taus: &[f64],
    seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<SweepEntry>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| CliError::Run(e.to_string()))?;
    pool.install(|| regime_sweep(problem, configs, taus, seed))
        .map_err(|e| CliError::Config(e.to_string()))
}

fn problem_metadata(cfg: &ExperimentConfig, seed: u64) -> Vec<(String, String)> {
    let d = &cfg.data;
    let mut m = vec![
        ("master_seed".to_string(), seed.to_string()),
        ("target".to_string(), format!("{:e}", cfg.target)),
        ("graph_kind".to_string(), cfg.graph.kind.clone()),
        ("graph_mixing".to_string(), cfg.graph.mixing.clone()),
        ("data_source".to_string(), d.source.clone()),
        ("data_mu".to_string(), format!("{:e}", d.mu)),
        ("data_dim".to_string(), d.dim.to_string()),
        ("data_seed".to_string(), d.seed.unwrap_or(seed).to_string()),
        ("data_partition".to_string(), d.partition.clone()),
    ];
    if d.source == "synthetic" {
        m.push(("data_samples".to_string(), d.samples.to_string()));
        m.push(("data_separation".to_string(), format!("{:e}", d.separation)));
    }
    if let Some(l) = d.l {
        m.push(("data_l".to_string(), format!("{l:e}")));
    }
    if let Some(p) = &d.path {
        m.push(("data_path".to_string(), p.display().to_string()));
    }
    m
}

fn tau_tag(tau: f64) -> String {
    format!("{tau}")
}

/// Writes one CSV per pair plus `summary_name`; returns the failure count.
fn write_sweep(
    dir: &Path,
    entries: Vec<SweepEntry>,
    extra_meta: &[(String, String)],
    target: f64,
    summary_name: &str,
) -> Result<Report, CliError> {
    let mut summary = String::from("label,tau,seed,time_to_target,final_time,final_suboptimality,outer_iterations,status\n");
    let mut failed = 0;
    for e in entries {
        let tag = tau_tag(e.tau);
        match e.trace {
            Ok(mut trace) => {
                let mut meta = vec![("label".to_string(), e.label.clone())];
                meta.extend(extra_meta.iter().cloned());
                meta.append(&mut trace.metadata);
                trace.metadata = meta;
                write(&dir.join(format!("{}_tau{tag}.csv", e.label)), &trace.to_csv())?;
                let last = trace.last().expect("trace has the initial sample");
                let ttt = trace.time_to_target(target).map_or("inf".to_string(), |t| format!("{t:.16e}"));
                let _ = writeln!(
                    summary,
                    "{},{tag},{},{ttt},{:.16e},{:.16e},{},ok",
                    e.label,
                    e.seed,
                    last.time,
                    last.suboptimality,
                    trace.samples.len() - 1
                );
                println!("{:<24} tau={:<8} time_to_target={ttt}", e.label, tag);
            }
            Err(err) => {
                failed += 1;
                let msg = err.to_string().replace(',', ";");
                let _ = writeln!(summary, "{},{tag},{},inf,nan,nan,0,error: {msg}", e.label, e.seed);
                eprintln!("{} tau={tag}: {err}", e.label);
            }
        }
    }
    write(&dir.join(summary_name), &summary)?;
    Ok(Report { failed })
}

fn schedule_dump(problem: &Problem, configs: &[(String, AlgorithmConfig)]) -> String {
    let mut s = String::from("label,algorithm,metric_rounds,rho,eta,beta,l_rho,mu_rho,kappa_rho,c_rho,delta_dual\n");
    for (label, c) in configs {
        match Runner::new(problem, c.clone()) {
            Ok(r) => match r.schedule() {
                Some(p) => {
                    let _ = writeln!(
                        s,
                        "{label},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        c.algorithm,
                        r.metric_rounds(),
                        p.rho,
                        p.eta,
                        p.beta,
                        p.l_rho,
                        p.mu_rho,
                        p.kappa_rho,
                        p.c_rho,
                        p.delta_dual
                    );
                }
                None => {
                    let _ = writeln!(s, "{label},{},1,,,,,,,,", c.algorithm);
                }
            },
            Err(e) => {
                let _ = writeln!(s, "{label},{},,,,,,,,,error: {}", c.algorithm, e.to_string().replace(',', ";"));
            }
        }
    }
    s
}

fn prepare(config: &Path, opts: &Options) -> Result<(ExperimentConfig, u64, Problem, PathBuf), CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let problem = cfg.build_problem(seed)?;
    let dir = out_dir(&cfg, opts);
    fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    Ok((cfg, seed, problem, dir))
}

pub fn cmd_run(config: &Path, opts: &Options) -> Result<Report, CliError> {
    let (cfg, seed, problem, dir) = prepare(config, opts)?;
    let configs = cfg.algorithm_configs(&problem)?;
    write(&dir.join("schedule.csv"), &schedule_dump(&problem, &configs))?;
    let entries = sweep(&problem, &configs, &cfg.taus, seed, opts.jobs)?;
    write_sweep(&dir, entries, &problem_metadata(&cfg, seed), cfg.target, "summary.csv")
}

/// IDEAL with AGD inner solves across multiples of the default
/// regularization, or across inner budgets.
pub fn cmd_ablate(
    config: &Path,
    axis: Axis,
    values: &[f64],
    inner_beta: Option<f64>,
    opts: &Options,
) -> Result<Report, CliError> {
    if values.is_empty() {
        return Err(CliError::field("--values", "needs at least one value"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::field("--values", format!("must be positive, got {v}")));
    }
    if axis == Axis::TInner {
        if let Some(v) = values.iter().find(|v| v.fract() != 0.0) {
            return Err(CliError::field("--values", format!("inner budgets must be integers, got {v}")));
        }
    }
    let (cfg, seed, problem, dir) = prepare(config, opts)?;
    let t_default = cfg
        .algorithms
        .iter()
        .find(|a| a.name.eq_ignore_ascii_case("ideal"))
        .map_or(100, |a| a.t_inner());
    let mut base = AlgorithmConfig::new(decopt::Algorithm::Ideal);
    base.inner = InnerSolver::Agd { beta: inner_beta };
    base.stop = InnerStop::Fixed(t_default);
    base.max_outer = cfg.max_outer;
    base.target = Some(cfg.target);
    let rho0 = default_rho(&problem, &base)?;

    let configs: Vec<(String, AlgorithmConfig)> = values
        .iter()
        .map(|&v| {
            let mut c = base.clone();
            match axis {
                Axis::Rho => c.rho = decopt::framework::RhoPolicy::Explicit(v * rho0),
                Axis::TInner => c.stop = InnerStop::Fixed(v as usize),
            }
            (format!("ideal_{}{v}", axis.as_str()), c)
        })
        .collect();
    write(&dir.join("schedule.csv"), &schedule_dump(&problem, &configs))?;
    let entries = sweep(&problem, &configs, &cfg.taus, seed, opts.jobs)?;
    let mut meta = problem_metadata(&cfg, seed);
    meta.push(("ablation_axis".to_string(), axis.as_str().to_string()));
    if axis == Axis::Rho {
        meta.push(("rho_default".to_string(), format!("{rho0:.16e}")));
    }
    write_sweep(&dir, entries, &meta, cfg.target, "ablation.csv")
}

fn load_source(source: &str) -> Result<MixingMatrix, CliError> {
    let (kind, arg) = source
        .split_once(':')
        .ok_or_else(|| CliError::field("source", format!("expected kind:n, edges:path or matrix:path, got `{source}`")))?;
    let bad = |e: decopt::Error| CliError::field("source", e);
    match kind {
        "edges" => laplacian(&load_edge_list(arg).map_err(bad)?).map_err(bad),
        "matrix" => {
            let text = fs::read_to_string(arg).map_err(|e| CliError::field("source", format!("cannot read {arg}: {e}")))?;
            let a = parse_dense_matrix(&text).map_err(bad)?;
            let g = support_graph(&a).map_err(bad)?;
            MixingMatrix::custom(g, a).map_err(bad)
        }
        k => {
            let kind: GraphKind = k.parse().map_err(bad)?;
            let n: usize = arg
                .parse()
                .map_err(|_| CliError::field("source", format!("bad agent count `{arg}`")))?;
            laplacian(&build_graph(kind, n).map_err(bad)?).map_err(bad)
        }
    }
}

/// Prints the mixing checks and spectra; `Ok(false)` if a check failed.
pub fn cmd_validate(source: &str) -> Result<bool, CliError> {
    let w = load_source(source)?;
    let report = validate(&w);
    println!("source: {source}");
    println!("agents: {}, edges: {}", w.n(), w.graph().num_edges());
    print!("{report}");
    if !report.all_passed() {
        println!("status: invalid");
        return Ok(false);
    }
    let spec = spectrum(&w).map_err(|e| CliError::Run(e.to_string()))?;
    println!("lambda_max: {:.12e}", spec.lambda_max);
    println!("lambda_min_plus: {:.12e}", spec.lambda_min_plus);
    println!("kappa_w: {:.12}", spec.kappa);
    let metric = Metric::chebyshev(w).map_err(|e| CliError::Run(e.to_string()))?;
    println!("chebyshev_rounds: {}", metric.rounds());
    println!("kappa_q: {:.12}", metric.spectrum().kappa);
    println!("status: valid");
    Ok(true)
}
