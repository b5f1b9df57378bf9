//! Experiment files (TOML).
//!
//! ```toml
//! seed = 7
//! target = 1e-5
//! taus = [0.01, 1.0, 100.0]
//! max_outer = 2000
//!
//! [graph]
//! kind = "cycle"        # cycle | path | complete | barbell | edges
//! n = 10
//! mixing = "laplacian"  # laplacian | metropolis
//!
//! [data]
//! source = "synthetic"  # synthetic | quadratic | file
//! mu = 1e-3
//! samples = 1000
//! dim = 20
//!
//! [[algorithm]]
//! name = "ideal"
//! t_inner = 100
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use decopt::framework::{
    Algorithm, AlgorithmConfig, BetaPolicy, EtaPolicy, InnerSolver, InnerStop, Problem, RhoPolicy, Runner,
};
use decopt::objectives::{
    load_dataset, partition, random_quadratics, synthesize_dataset, DatasetFormat, GlobalObjective,
    PartitionScheme,
};
use decopt::topology::{
    build_graph, from_doubly_stochastic, laplacian, load_edge_list, metropolis_weights, GraphKind, MixingMatrix,
    NetworkGraph,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub target: f64,
    pub taus: Vec<f64>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    pub graph: GraphSection,
    pub data: DataSection,
    #[serde(rename = "algorithm", default)]
    pub algorithms: Vec<AlgorithmSection>,
}

fn default_max_outer() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub kind: String,
    pub n: Option<usize>,
    /// Edge list for `kind = "edges"`.
    pub path: Option<PathBuf>,
    #[serde(default = "default_mixing")]
    pub mixing: String,
}

fn default_mixing() -> String {
    "laplacian".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: String,
    pub mu: f64,
    /// Largest Hessian eigenvalue of the quadratic source.
    pub l: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub path: Option<PathBuf>,
    pub format: Option<String>,
    #[serde(default = "default_partition")]
    pub partition: String,
    /// Defaults to the master seed.
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    1000
}

fn default_dim() -> usize {
    20
}

fn default_separation() -> f64 {
    0.5
}

fn default_partition() -> String {
    "contiguous".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EtaSetting {
    /// `"theory"` or `"rho"`.
    Named(String),
    Value(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: String,
    pub label: Option<String>,
    pub rho: Option<f64>,
    /// Multiple of the default regularization.
    pub rho_scale: Option<f64>,
    pub eta: Option<EtaSetting>,
    pub beta: Option<f64>,
    /// Fixed inner budget; 100 when neither this nor `t_inner_scale` is set.
    pub t_inner: Option<usize>,
    /// Multiple of the theoretical GD/AGD inner budget.
    pub t_inner_scale: Option<f64>,
    #[serde(default = "default_inner")]
    pub inner: String,
    pub inner_beta: Option<f64>,
    pub inner_step: Option<f64>,
    /// Step of EXTRA and DGD.
    pub step: Option<f64>,
    pub max_outer: Option<usize>,
}

fn default_inner() -> String {
    "agd".into()
}

impl AlgorithmSection {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.to_ascii_lowercase())
    }

    pub fn t_inner(&self) -> usize {
        self.t_inner.unwrap_or(100)
    }

    fn stop(&self) -> InnerStop {
        match self.t_inner_scale {
            Some(m) => InnerStop::Theory(m),
            None => InnerStop::Fixed(self.t_inner()),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    /// Reads and checks a config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.graph.path, &mut cfg.data.path, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.target > 0.0 && self.target.is_finite()) {
            return Err(CliError::field("target", format!("must be positive, got {}", self.target)));
        }
        if self.taus.is_empty() {
            return Err(CliError::field("taus", "needs at least one value"));
        }
        if let Some(t) = self.taus.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(CliError::field("taus", format!("must be finite and >= 0, got {t}")));
        }
        if self.max_outer == 0 {
            return Err(CliError::field("max_outer", "must be positive"));
        }
        self.graph_kind()?;
        if !matches!(self.graph.mixing.as_str(), "laplacian" | "metropolis") {
            return Err(CliError::field("graph.mixing", format!("unknown mixing `{}`", self.graph.mixing)));
        }
        if let Some(p) = &self.graph.path {
            if !p.is_file() {
                return Err(CliError::field("graph.path", format!("{} does not exist", p.display())));
            }
        }
        if !(self.data.mu > 0.0 && self.data.mu.is_finite()) {
            return Err(CliError::field("data.mu", format!("must be positive, got {}", self.data.mu)));
        }
        match self.data.source.as_str() {
            "synthetic" | "quadratic" => {}
            "file" => {
                let p = self.data.path.as_ref().ok_or_else(|| CliError::field("data.path", "required for file source"))?;
                if !p.is_file() {
                    return Err(CliError::field("data.path", format!("{} does not exist", p.display())));
                }
                self.data_format()?;
            }
            other => return Err(CliError::field("data.source", format!("unknown source `{other}`"))),
        }
        self.data
            .partition
            .parse::<PartitionScheme>()
            .map_err(|e| CliError::field("data.partition", e))?;
        if self.algorithms.is_empty() {
            return Err(CliError::field("algorithm", "needs at least one [[algorithm]] entry"));
        }
        let mut labels = BTreeSet::new();
        for (i, a) in self.algorithms.iter().enumerate() {
            let field = |f: &str| format!("algorithm[{i}].{f}");
            a.name.parse::<Algorithm>().map_err(|e| CliError::field(&field("name"), e))?;
            parse_inner(a).map_err(|e| CliError::field(&field("inner"), e))?;
            if a.t_inner == Some(0) {
                return Err(CliError::field(&field("t_inner"), "must be positive"));
            }
            if let Some(m) = a.t_inner_scale {
                if a.t_inner.is_some() {
                    return Err(CliError::field(&field("t_inner"), "set either t_inner or t_inner_scale"));
                }
                if !(m > 0.0 && m.is_finite()) {
                    return Err(CliError::field(&field("t_inner_scale"), format!("must be positive, got {m}")));
                }
                if !matches!(a.inner.as_str(), "gd" | "agd") {
                    return Err(CliError::field(&field("t_inner_scale"), "needs inner = \"gd\" or \"agd\""));
                }
            }
            if a.rho.is_some() && a.rho_scale.is_some() {
                return Err(CliError::field(&field("rho"), "set either rho or rho_scale"));
            }
            if let Some(EtaSetting::Named(s)) = &a.eta {
                if !matches!(s.as_str(), "theory" | "rho") {
                    return Err(CliError::field(&field("eta"), format!("expected theory, rho or a number, got `{s}`")));
                }
            }
            if !labels.insert(a.label()) {
                return Err(CliError::field(&field("label"), format!("duplicate label `{}`", a.label())));
            }
        }
        Ok(())
    }

    fn graph_kind(&self) -> Result<GraphKind, CliError> {
        match self.graph.kind.as_str() {
            "edges" => {
                if self.graph.path.is_none() {
                    return Err(CliError::field("graph.path", "required for kind = \"edges\""));
                }
                Ok(GraphKind::Custom)
            }
            k => {
                let kind = k.parse::<GraphKind>().map_err(|e| CliError::field("graph.kind", e))?;
                if kind == GraphKind::Custom || self.graph.n.is_none() {
                    return Err(CliError::field("graph.n", "required for built-in topologies"));
                }
                Ok(kind)
            }
        }
    }

    fn data_format(&self) -> Result<DatasetFormat, CliError> {
        self.data
            .format
            .as_deref()
            .unwrap_or("csv")
            .parse()
            .map_err(|e| CliError::field("data.format", e))
    }

    pub fn build_graph(&self) -> Result<NetworkGraph, CliError> {
        let kind = self.graph_kind()?;
        let g = match (kind, &self.graph.path) {
            (GraphKind::Custom, Some(p)) => load_edge_list(p),
            _ => build_graph(kind, self.graph.n.unwrap_or(0)),
        };
        g.map_err(|e| CliError::field("graph", e))
    }

    pub fn build_mixing(&self) -> Result<MixingMatrix, CliError> {
        let g = self.build_graph()?;
        let w = match self.graph.mixing.as_str() {
            "metropolis" => from_doubly_stochastic(&g, &metropolis_weights(&g)),
            _ => laplacian(&g),
        };
        w.map_err(|e| CliError::field("graph.mixing", e))
    }

    pub fn build_objective(&self, n: usize, master_seed: u64) -> Result<GlobalObjective, CliError> {
        let d = &self.data;
        let seed = d.seed.unwrap_or(master_seed);
        let scheme: PartitionScheme = d.partition.parse().map_err(|e| CliError::field("data.partition", e))?;
        let locals = match d.source.as_str() {
            "quadratic" => random_quadratics(seed, n, d.dim, d.mu, d.l.unwrap_or(1.0)),
            "synthetic" => synthesize_dataset(seed, d.samples, d.dim, d.separation)
                .and_then(|ds| partition(&ds, n, scheme, d.mu)),
            _ => {
                let path = d.path.as_ref().expect("validated");
                load_dataset(path, self.data_format()?).and_then(|ds| partition(&ds, n, scheme, d.mu))
            }
        };
        let locals = locals.map_err(|e| CliError::field("data", e))?;
        GlobalObjective::new(locals).map_err(|e| CliError::field("data", e))
    }

    /// Problem with its centralized optimum attached.
    pub fn build_problem(&self, master_seed: u64) -> Result<Problem, CliError> {
        let w = self.build_mixing()?;
        let f = self.build_objective(w.n(), master_seed)?;
        let problem = Problem::new(f, w).map_err(|e| CliError::Config(e.to_string()))?;
        problem
            .with_reference(1e-10)
            .map_err(|e| CliError::Run(format!("reference solution: {e}")))
    }

    /// Library configurations in file order, labelled.
    pub fn algorithm_configs(&self, problem: &Problem) -> Result<Vec<(String, AlgorithmConfig)>, CliError> {
        self.algorithms
            .iter()
            .map(|a| Ok((a.label(), self.algorithm_config(a, problem)?)))
            .collect()
    }

    pub fn algorithm_config(&self, a: &AlgorithmSection, problem: &Problem) -> Result<AlgorithmConfig, CliError> {
        let algorithm: Algorithm = a.name.parse().map_err(|e| CliError::field("algorithm.name", e))?;
        let mut c = AlgorithmConfig::new(algorithm);
        c.inner = parse_inner(a).map_err(|e| CliError::field("algorithm.inner", e))?;
        c.stop = a.stop();
        c.max_outer = a.max_outer.unwrap_or(self.max_outer);
        c.target = Some(self.target);
        c.step = a.step;
        if let Some(b) = a.beta {
            c.beta = BetaPolicy::Explicit(b);
        }
        c.eta = match &a.eta {
            None => EtaPolicy::Theory,
            Some(EtaSetting::Value(v)) => EtaPolicy::Explicit(*v),
            Some(EtaSetting::Named(s)) if s == "rho" => EtaPolicy::Rho,
            Some(EtaSetting::Named(_)) => EtaPolicy::Theory,
        };
        if let Some(r) = a.rho {
            c.rho = RhoPolicy::Explicit(r);
        }
        if let Some(scale) = a.rho_scale {
            c.rho = RhoPolicy::Explicit(scale * default_rho(problem, &c)?);
        }
        Ok(c)
    }
}

/// Regularization the library would pick for `config`.
pub fn default_rho(problem: &Problem, config: &AlgorithmConfig) -> Result<f64, CliError> {
    let mut probe = config.clone();
    probe.rho = RhoPolicy::Default;
    let runner = Runner::new(problem, probe).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(runner.schedule().map_or(0.0, |s| s.rho))
}

fn parse_inner(a: &AlgorithmSection) -> Result<InnerSolver, String> {
    match a.inner.as_str() {
        "gd" => Ok(InnerSolver::Gd { step: a.inner_step }),
        "agd" => Ok(InnerSolver::Agd { beta: a.inner_beta }),
        "sgd" => Ok(InnerSolver::Sgd),
        "exact" => Ok(InnerSolver::Exact { tol: 1e-12 }),
        other => Err(format!("unknown inner solver `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
target = 1e-6
taus = [1.0]

[graph]
kind = "cycle"
n = 4

[data]
source = "quadratic"
mu = 0.1
l = 2.0
dim = 3

[[algorithm]]
name = "ideal"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.algorithms[0].t_inner(), 100);
        assert_eq!(c.algorithms[0].label(), "ideal");
        let p = c.build_problem(0).unwrap();
        assert_eq!((p.n(), p.d()), (4, 3));
    }

    #[test]
    fn unknown_algorithm_names_the_field() {
        let text = MINIMAL.replace("name = \"ideal\"", "name = \"fancy\"");
        let err = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("algorithm[0].name"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("taus = [1.0]", "taus = [1.0]\ntaget = 3");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("taget"), "{err}");
    }

    #[test]
    fn target_must_be_positive() {
        let text = MINIMAL.replace("target = 1e-6", "target = 0.0");
        let err = ExperimentConfig::parse(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().starts_with("config error: target"));
    }

    #[test]
    fn rho_scale_multiplies_the_default() {
        let text = MINIMAL.replace("name = \"ideal\"", "name = \"ideal\"\nrho_scale = 2.0");
        let c = ExperimentConfig::parse(&text).unwrap();
        let p = c.build_problem(0).unwrap();
        let cfg = c.algorithm_config(&c.algorithms[0], &p).unwrap();
        let base = default_rho(&p, &AlgorithmConfig::new(Algorithm::Ideal)).unwrap();
        assert_eq!(cfg.rho, RhoPolicy::Explicit(2.0 * base));
    }

    #[test]
    fn theoretical_inner_budget() {
        let text = MINIMAL.replace("name = \"ideal\"", "name = \"ideal\"\nt_inner_scale = 0.5");
        let c = ExperimentConfig::parse(&text).unwrap();
        c.validate().unwrap();
        let p = c.build_problem(0).unwrap();
        assert_eq!(c.algorithm_config(&c.algorithms[0], &p).unwrap().stop, InnerStop::Theory(0.5));

        let both = text.replace("t_inner_scale", "t_inner = 10\nt_inner_scale");
        let err = ExperimentConfig::parse(&both).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("algorithm[0].t_inner"), "{err}");
        let sgd = text.replace("t_inner_scale", "inner = \"sgd\"\nt_inner_scale");
        let err = ExperimentConfig::parse(&sgd).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("t_inner_scale"), "{err}");
    }
}
