//! Network graphs, mixing matrices and their spectra.
//!
//! A mixing matrix `W` encodes one synchronous communication round: agent `i`
//! receives `sum_j W_ij x_j`. Every algorithm in this crate assumes `W` is
//! symmetric, positive semi-definite, supported on the graph edges plus the
//! diagonal, and has kernel exactly `span(1)`. [`validate`] measures each of
//! those four properties and [`spectrum`] extracts the extreme eigenvalues
//! that drive all step-size schedules.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative tolerance for the kernel and PSD checks (scaled by the spectral radius).
pub const TOL_SPECTRAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphKind {
    Cycle,
    Path,
    Complete,
    Barbell,
    Custom,
}

impl GraphKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Cycle => "cycle",
            GraphKind::Path => "path",
            GraphKind::Complete => "complete",
            GraphKind::Barbell => "barbell",
            GraphKind::Custom => "custom",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cycle" | "ring" | "circular" => Ok(GraphKind::Cycle),
            "path" | "line" => Ok(GraphKind::Path),
            "complete" => Ok(GraphKind::Complete),
            "barbell" => Ok(GraphKind::Barbell),
            "custom" => Ok(GraphKind::Custom),
            other => Err(Error::InvalidParameter(format!("unknown graph kind `{other}`"))),
        }
    }
}

/// Undirected simple graph over agents `0..n`. Edges are stored as `(i, j)`
/// with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    kind: GraphKind,
}

impl NetworkGraph {
    /// Builds a graph from an arbitrary edge list and checks connectivity.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        kind: GraphKind,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraphSize {
                kind: kind.as_str(),
                n,
                reason: "need at least two agents",
            });
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j || i >= n || j >= n {
                return Err(Error::InvalidEdge(i, j));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let g = NetworkGraph { n, edges: set, kind };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Relabels agents: agent `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::shape(format!("permutation of {}", self.n), perm.len().to_string()));
        }
        NetworkGraph::from_edges(self.n, self.edges().map(|(i, j)| (perm[i], perm[j])), self.kind)
    }
}

/// Builds one of the standard topologies. Edge sets are deterministic.
pub fn build_graph(kind: GraphKind, n: usize) -> Result<NetworkGraph> {
    let too_small = |reason| Error::InvalidGraphSize {
        kind: kind.as_str(),
        n,
        reason,
    };
    if n < 2 {
        return Err(too_small("need at least two agents"));
    }
    let edges: Vec<(usize, usize)> = match kind {
        GraphKind::Cycle => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        GraphKind::Path => (0..n - 1).map(|i| (i, i + 1)).collect(),
        GraphKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        GraphKind::Barbell => {
            if n < 4 || n % 2 != 0 {
                return Err(too_small("barbell needs an even count of at least four"));
            }
            let h = n / 2;
            let mut e: Vec<_> = (0..h).flat_map(|i| (i + 1..h).map(move |j| (i, j))).collect();
            e.extend((h..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))));
            e.push((h - 1, h));
            e
        }
        GraphKind::Custom => {
            return Err(Error::InvalidParameter(
                "custom graphs are loaded from an edge list".into(),
            ))
        }
    };
    NetworkGraph::from_edges(n, edges, kind)
}

/// Parses an edge list: one `i j` pair per line, 0-indexed, `#` starts a comment.
pub fn parse_edge_list(text: &str) -> Result<NetworkGraph> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(Error::Dataset(format!(
                "edge list line {}: expected two indices, got `{line}`",
                lineno + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| {
                Error::Dataset(format!("edge list line {}: bad index `{s}`", lineno + 1))
            })
        };
        let (i, j) = (parse(parts[0])?, parse(parts[1])?);
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j));
    }
    NetworkGraph::from_edges(n, edges, GraphKind::Custom)
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<NetworkGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edge_list(&text)
}

/// Parses a dense whitespace-separated square matrix, one row per line.
pub fn parse_dense_matrix(text: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Dataset(format!("bad matrix entry `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Dataset("matrix file is not square".into()));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingSource {
    Laplacian,
    FromDoublyStochastic,
    Custom,
}

impl MixingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            MixingSource::Laplacian => "laplacian",
            MixingSource::FromDoublyStochastic => "from-doubly-stochastic",
            MixingSource::Custom => "custom",
        }
    }
}

/// Graph whose edges are the off-diagonal nonzeros of `a`, in either triangle.
pub fn support_graph(a: &Array2<f64>) -> Result<NetworkGraph> {
    let (n, m) = a.dim();
    if n != m {
        return Err(Error::shape("square matrix", format!("{n}x{m}")));
    }
    let edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| a[[i, j]] != 0.0 || a[[j, i]] != 0.0);
    NetworkGraph::from_edges(n, edges, GraphKind::Custom)
}

/// A mixing matrix together with the graph whose edges it may use.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    entries: Array2<f64>,
    source: MixingSource,
    graph: NetworkGraph,
}

impl MixingMatrix {
    /// Wraps an arbitrary matrix without checking anything; see [`validate`].
    pub fn custom(graph: NetworkGraph, entries: Array2<f64>) -> Result<Self> {
        let n = graph.n();
        if entries.dim() != (n, n) {
            return Err(Error::shape(format!("{n}x{n}"), format!("{:?}", entries.dim())));
        }
        Ok(MixingMatrix {
            entries,
            source: MixingSource::Custom,
            graph,
        })
    }

    /// Wraps a matrix and rejects it unless every mixing property holds.
    pub fn custom_checked(graph: NetworkGraph, entries: Array2<f64>) -> Result<Self> {
        let w = Self::custom(graph, entries)?;
        w.ensure_valid()?;
        Ok(w)
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn source(&self) -> MixingSource {
        self.source
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    fn ensure_valid(&self) -> Result<()> {
        let report = validate(self);
        if let Some(failed) = report.checks.iter().find(|c| !c.passed) {
            return Err(Error::InvalidMixing(format!(
                "{} check failed (residual {:e}){}",
                failed.name,
                failed.residual,
                failed.detail.as_deref().map(|d| format!(": {d}")).unwrap_or_default()
            )));
        }
        Ok(())
    }
}

/// Unit-weight graph Laplacian `D - A`.
pub fn laplacian(g: &NetworkGraph) -> Result<MixingMatrix> {
    let n = g.n();
    let mut w = Array2::zeros((n, n));
    for (i, j) in g.edges() {
        w[[i, j]] = -1.0;
        w[[j, i]] = -1.0;
        w[[i, i]] += 1.0;
        w[[j, j]] += 1.0;
    }
    let m = MixingMatrix {
        entries: w,
        source: MixingSource::Laplacian,
        graph: g.clone(),
    };
    m.ensure_valid()?;
    Ok(m)
}

/// Metropolis-Hastings weights: `1 / (1 + max(d_i, d_j))` on edges, remainder on the diagonal.
pub fn metropolis_weights(g: &NetworkGraph) -> Array2<f64> {
    let n = g.n();
    let deg = g.degrees();
    let mut w = Array2::zeros((n, n));
    for (i, j) in g.edges() {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[[i, j]] = v;
        w[[j, i]] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[[i, j]]).sum();
        w[[i, i]] = 1.0 - off;
    }
    w
}

/// Converts a symmetric doubly stochastic matrix into the mixing matrix `I - w_ds`.
pub fn from_doubly_stochastic(g: &NetworkGraph, w_ds: &Array2<f64>) -> Result<MixingMatrix> {
    let n = g.n();
    if w_ds.dim() != (n, n) {
        return Err(Error::shape(format!("{n}x{n}"), format!("{:?}", w_ds.dim())));
    }
    const TOL: f64 = 1e-9;
    for i in 0..n {
        let row: f64 = w_ds.row(i).sum();
        let col: f64 = w_ds.column(i).sum();
        if (row - 1.0).abs() > TOL || (col - 1.0).abs() > TOL {
            return Err(Error::InvalidMixing(format!(
                "row/column {i} sums to {row}/{col}, expected 1"
            )));
        }
    }
    let entries = Array2::eye(n) - w_ds;
    let m = MixingMatrix {
        entries,
        source: MixingSource::FromDoublyStochastic,
        graph: g.clone(),
    };
    m.ensure_valid()?;
    Ok(m)
}

/// Extreme eigenvalues of a mixing operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub lambda_max: f64,
    pub lambda_min_plus: f64,
    pub kappa: f64,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl SpectralSummary {
    /// Summarizes an eigenvalue list. The smallest eigenvalue is the kernel
    /// eigenvalue; `lambda_min_plus` is the smallest one above `TOL_SPECTRAL * lambda_max`.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("eigenvalue".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let lambda_max = *eigenvalues.last().ok_or(Error::NoPositiveEigenvalue)?;
        let threshold = TOL_SPECTRAL * lambda_max.abs();
        let lambda_min_plus = eigenvalues
            .iter()
            .copied()
            .find(|&v| v > threshold)
            .ok_or(Error::NoPositiveEigenvalue)?;
        Ok(SpectralSummary {
            lambda_max,
            lambda_min_plus,
            kappa: lambda_max / lambda_min_plus,
            eigenvalues,
        })
    }
}

pub(crate) fn symmetric_eigen(a: &Array2<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let n = a.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    SymmetricEigen::new(m)
}

pub(crate) fn eigenvalues_of(a: &Array2<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = symmetric_eigen(a).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenvalues of `w` via a dense symmetric eigensolver.
pub fn spectrum(w: &MixingMatrix) -> Result<SpectralSummary> {
    SpectralSummary::from_eigenvalues(eigenvalues_of(w.entries()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
    pub detail: Option<String>,
}

/// Outcome of checking the four mixing-matrix properties.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{:<15} {:<4} residual={:.3e}",
                c.name,
                if c.passed { "ok" } else { "FAIL" },
                c.residual
            )?;
            if let Some(d) = &c.detail {
                write!(f, " ({d})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Measures symmetry, positive semi-definiteness, the decentralized support
/// property and the simple-kernel property of `w`. Never fails; failures are
/// carried in the report.
pub fn validate(w: &MixingMatrix) -> ValidationReport {
    let a = w.entries();
    let n = w.n();

    let mut asym = 0.0f64;
    let mut off_support = 0.0f64;
    let mut worst_pair = None;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((a[[i, j]] - a[[j, i]]).abs());
            if i != j && !w.graph().has_edge(i, j) && a[[i, j]] != 0.0 && a[[i, j]].abs() > off_support {
                off_support = a[[i, j]].abs();
                worst_pair = Some((i, j));
            }
        }
    }

    let eig = eigenvalues_of(a);
    let scale = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TOL_SPECTRAL * scale;
    let lambda_min = eig.first().copied().unwrap_or(0.0);

    let ones_residual = (0..n)
        .map(|i| a.row(i).sum().abs())
        .fold(0.0f64, f64::max);
    let second = eig.get(1).copied().unwrap_or(0.0);
    let kernel_ok = scale > 0.0 && ones_residual <= tol && second > tol;
    let kernel_dim = eig.iter().filter(|v| v.abs() <= tol).count();

    ValidationReport {
        checks: vec![
            CheckResult {
                name: "symmetry",
                passed: asym == 0.0,
                residual: asym,
                detail: None,
            },
            CheckResult {
                name: "positiveness",
                passed: lambda_min >= -tol,
                residual: (-lambda_min).max(0.0),
                detail: Some(format!("lambda_min={lambda_min:.6e}")),
            },
            CheckResult {
                name: "decentralized",
                passed: off_support == 0.0,
                residual: off_support,
                detail: worst_pair.map(|(i, j)| format!("nonzero entry at ({i},{j}) off the edge set")),
            },
            CheckResult {
                name: "spectrum",
                passed: kernel_ok,
                residual: ones_residual,
                detail: Some(format!("kernel dimension {kernel_dim}")),
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_four_edges() {
        let g = build_graph(GraphKind::Cycle, 4).unwrap();
        let e: Vec<_> = g.edges().collect();
        assert_eq!(e, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn support_graph_reads_either_triangle() {
        let a = ndarray::arr2(&[[1.0, -1.0, 0.0], [-1.0, 2.0, 0.0], [0.0, -0.5, 0.5]]);
        let g = support_graph(&a).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert!(matches!(support_graph(&Array2::eye(3)), Err(Error::Disconnected)));
    }

    #[test]
    fn complete_three_edges() {
        let g = build_graph(GraphKind::Complete, 3).unwrap();
        let e: Vec<_> = g.edges().collect();
        assert_eq!(e, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn barbell_eight_has_two_cliques_and_a_bridge() {
        let g = build_graph(GraphKind::Barbell, 8).unwrap();
        assert_eq!(g.num_edges(), 2 * 6 + 1);
        assert!(g.has_edge(3, 4));
        assert!(!g.has_edge(2, 5));
        assert!(g.has_edge(4, 7));
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(build_graph(GraphKind::Barbell, 6).is_ok());
        assert!(build_graph(GraphKind::Barbell, 5).is_err());
        assert!(build_graph(GraphKind::Barbell, 2).is_err());
        assert!(build_graph(GraphKind::Cycle, 1).is_err());
        assert!(build_graph(GraphKind::Path, 0).is_err());
    }

    #[test]
    fn laplacian_small_cases() {
        let p = laplacian(&build_graph(GraphKind::Path, 2).unwrap()).unwrap();
        assert_eq!(p.entries(), &ndarray::arr2(&[[1.0, -1.0], [-1.0, 1.0]]));
        let k = laplacian(&build_graph(GraphKind::Complete, 3).unwrap()).unwrap();
        assert_eq!(
            k.entries(),
            &ndarray::arr2(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
        );
        let c = laplacian(&build_graph(GraphKind::Cycle, 4).unwrap()).unwrap();
        for i in 0..4 {
            assert_eq!(c.get(i, i), 2.0);
            assert_eq!(c.get(i, (i + 1) % 4), -1.0);
            assert_eq!(c.get(i, (i + 2) % 4), 0.0);
        }
    }

    #[test]
    fn doubly_stochastic_conversion() {
        let g3 = build_graph(GraphKind::Complete, 3).unwrap();
        assert!(matches!(
            from_doubly_stochastic(&g3, &Array2::eye(3)),
            Err(Error::InvalidMixing(_))
        ));

        let g2 = build_graph(GraphKind::Path, 2).unwrap();
        let w = from_doubly_stochastic(&g2, &Array2::from_elem((2, 2), 0.5)).unwrap();
        assert_eq!(w.entries(), &ndarray::arr2(&[[0.5, -0.5], [-0.5, 0.5]]));

        let bad = ndarray::arr2(&[[0.9, 0.2], [0.1, 0.8]]);
        assert!(from_doubly_stochastic(&g2, &bad).is_err());
    }

    #[test]
    fn metropolis_on_cycle_has_simple_kernel() {
        let g = build_graph(GraphKind::Cycle, 4).unwrap();
        let w = from_doubly_stochastic(&g, &metropolis_weights(&g)).unwrap();
        // Metropolis on the 4-cycle: every weight is 1/3, so I - W_ds = L/3.
        let s = spectrum(&w).unwrap();
        let expect = [0.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(validate(&w).all_passed());
    }

    #[test]
    fn spectra_of_standard_graphs() {
        let s = spectrum(&laplacian(&build_graph(GraphKind::Cycle, 4).unwrap()).unwrap()).unwrap();
        for (a, b) in s.eigenvalues.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12, "{:?}", s.eigenvalues);
        }
        assert!((s.kappa - 2.0).abs() < 1e-12);

        let s = spectrum(&laplacian(&build_graph(GraphKind::Complete, 4).unwrap()).unwrap()).unwrap();
        for (a, b) in s.eigenvalues.iter().zip([0.0, 4.0, 4.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((s.kappa - 1.0).abs() < 1e-12);

        let s = spectrum(&laplacian(&build_graph(GraphKind::Path, 2).unwrap()).unwrap()).unwrap();
        assert!((s.lambda_max - 2.0).abs() < 1e-12);
        assert!((s.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_spectrum_matches_closed_form() {
        for n in [5usize, 9, 16] {
            let s = spectrum(&laplacian(&build_graph(GraphKind::Cycle, n).unwrap()).unwrap()).unwrap();
            let mut closed: Vec<f64> = (0..n)
                .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
                .collect();
            closed.sort_by(f64::total_cmp);
            for (a, b) in s.eigenvalues.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn validation_failures() {
        let path = build_graph(GraphKind::Path, 3).unwrap();
        let mut w = laplacian(&path).unwrap().entries().clone();
        w[[0, 2]] = -0.1;
        w[[2, 0]] = -0.1;
        w[[0, 0]] += 0.1;
        w[[2, 2]] += 0.1;
        let r = validate(&MixingMatrix::custom(path.clone(), w).unwrap());
        assert!(!r.check("decentralized").unwrap().passed);
        assert!(r.check("symmetry").unwrap().passed);

        let neg = -laplacian(&path).unwrap().entries().clone();
        let r = validate(&MixingMatrix::custom(path.clone(), neg).unwrap());
        assert!(!r.check("positiveness").unwrap().passed);

        let mut asym = laplacian(&path).unwrap().entries().clone();
        asym[[0, 1]] = -0.5;
        let r = validate(&MixingMatrix::custom(path, asym).unwrap());
        assert!(!r.check("symmetry").unwrap().passed);
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_edge_list("# ring\n0 1\n1 2 # tail\n\n2 0\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.num_edges(), 3);
        assert!(parse_edge_list("0 1\n2 3\n").is_err());
        assert!(parse_edge_list("0 x\n").is_err());
    }
}
