//! Synchronous time model: a gradient round costs 1, a communication round costs `tau`.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::blockspace::{consensus_gap, BlockVector};
use crate::error::{Error, Result};
use crate::framework::{run, run_ideal_per_agent, AlgorithmConfig, InnerStop, Problem, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub tau: f64,
}

impl CostModel {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {tau}")));
        }
        Ok(CostModel { tau })
    }

    pub fn time(&self, grad_rounds: usize, mixing_rounds: usize) -> f64 {
        grad_rounds as f64 + mixing_rounds as f64 * self.tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    #[default]
    Matrix,
    /// Node-by-node execution; plain-metric IDEAL family only.
    PerAgent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub suboptimality: f64,
    pub consensus_gap: f64,
    pub grad_rounds: usize,
    pub mixing_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    pub samples: Vec<Sample>,
    pub metadata: Vec<(String, String)>,
}

impl TimeTrace {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// First sampled time at which suboptimality is at most `target`.
    pub fn time_to_target(&self, target: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.suboptimality <= target).map(|s| s.time)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "time,suboptimality,consensus_gap")?;
        for s in &self.samples {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", s.time, s.suboptimality, s.consensus_gap)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed of one `(algorithm, tau)` pair; independent of which other pairs run.
pub fn derive_seed(master: u64, label: &str, tau: f64) -> u64 {
    let mut bytes = master.to_le_bytes().to_vec();
    bytes.extend_from_slice(label.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&tau.to_bits().to_le_bytes());
    fnv1a(&bytes)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn metadata(problem: &Problem, config: &AlgorithmConfig, cost: CostModel, run: &RunTrace) -> Vec<(String, String)> {
    let mut m: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| m.push((k.to_string(), v));
    put("algorithm", config.algorithm.to_string());
    put("tau", fmt_f(cost.tau));
    put("seed", config.seed.to_string());
    put("config_hash", format!("{:016x}", fnv1a(format!("{config:?}").as_bytes())));
    put("n", problem.n().to_string());
    put("d", problem.d().to_string());
    put("graph", problem.mixing().graph().kind().as_str().to_string());
    put("mixing", problem.mixing().source().as_str().to_string());
    put("inner", config.inner.name().to_string());
    put(
        "inner_stop",
        match config.stop {
            InnerStop::Fixed(t) => format!("fixed:{t}"),
            InnerStop::Accuracy => "accuracy".to_string(),
            InnerStop::Theory(m) => format!("theory:{m}"),
        },
    );
    put("metric_rounds", run.metric_rounds.to_string());
    if let Some(s) = &run.schedule {
        put("rho", fmt_f(s.rho));
        put("eta", fmt_f(s.eta));
        put("beta", fmt_f(s.beta));
        put("l_rho", fmt_f(s.l_rho));
        put("mu_rho", fmt_f(s.mu_rho));
        put("kappa_rho", fmt_f(s.kappa_rho));
        put("c_rho", fmt_f(s.c_rho));
        put("delta_dual", fmt_f(s.delta_dual));
    }
    if let Some(step) = config.step {
        put("step", fmt_f(step));
    }
    put("outer_iterations", run.records.len().to_string());
    put("suboptimality", "f(consensus_mean(X)) - f(x*)".to_string());
    put(
        "accounting",
        "gradient round 1, mixing round tau; outer loop charges warm start and dual update once each".to_string(),
    );
    m
}

/// Runs one configuration and converts its records into a time trace,
/// starting from the sample at `X_0 = 0`.
pub fn simulate(problem: &Problem, config: &AlgorithmConfig, cost: CostModel, mode: ExecutionMode) -> Result<TimeTrace> {
    if problem.f_star().is_none() {
        return Err(Error::MissingReference);
    }
    let trace = match mode {
        ExecutionMode::Matrix => run(problem, config.clone())?,
        ExecutionMode::PerAgent => run_ideal_per_agent(problem, config.clone())?,
    };
    let x0 = BlockVector::zeros(problem.n(), problem.d());
    let mut samples = vec![Sample {
        time: 0.0,
        suboptimality: problem.suboptimality(&x0)?,
        consensus_gap: consensus_gap(&x0),
        grad_rounds: 0,
        mixing_rounds: 0,
    }];
    let (mut grads, mut mixes) = (0, 0);
    for r in &trace.records {
        grads += r.grad_evals;
        mixes += r.mixing_rounds;
        if !r.suboptimality.is_finite() {
            return Err(Error::NonFinite(format!("suboptimality at outer iteration {}", r.k)));
        }
        samples.push(Sample {
            time: cost.time(grads, mixes),
            suboptimality: r.suboptimality,
            consensus_gap: r.consensus_gap,
            grad_rounds: grads,
            mixing_rounds: mixes,
        });
    }
    Ok(TimeTrace {
        metadata: metadata(problem, config, cost, &trace),
        samples,
    })
}

#[derive(Debug)]
pub struct SweepEntry {
    pub label: String,
    pub tau: f64,
    pub seed: u64,
    pub trace: Result<TimeTrace>,
}

/// Simulates every `(config, tau)` pair in parallel. Entries come back in
/// input order, configs outermost; each pair's seed is derived from `master_seed`.
pub fn regime_sweep(
    problem: &Problem,
    configs: &[(String, AlgorithmConfig)],
    taus: &[f64],
    master_seed: u64,
) -> Result<Vec<SweepEntry>> {
    if configs.is_empty() || taus.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one algorithm and one tau".into()));
    }
    let costs = taus.iter().map(|&t| CostModel::new(t)).collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(&String, &AlgorithmConfig, CostModel)> = configs
        .iter()
        .flat_map(|(l, c)| costs.iter().map(move |&cost| (l, c, cost)))
        .collect();
    Ok(pairs
        .into_par_iter()
        .map(|(label, config, cost)| {
            let seed = derive_seed(master_seed, label, cost.tau);
            let mut config = config.clone();
            config.seed = seed;
            SweepEntry {
                label: label.clone(),
                tau: cost.tau,
                seed,
                trace: simulate(problem, &config, cost, ExecutionMode::Matrix),
            }
        })
        .collect())
}
