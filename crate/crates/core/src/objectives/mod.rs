//! Local loss oracles, the separable global objective and a centralized
//! reference solver.

mod dataset;

pub use dataset::{
    load_dataset, parse_csv, parse_libsvm, partition, random_quadratics, synthesize_dataset,
    Dataset, DatasetFormat, PartitionScheme,
};

use ndarray::{Array1, Array2, ArrayView1};

use crate::blockspace::BlockVector;
use crate::error::{Error, Result};
use crate::topology::eigenvalues_of;

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `f(x) = (1/m) sum_j log(1 + exp(-y_j a_j^T x)) + (mu/2) |x|^2`.
#[derive(Debug, Clone)]
pub struct LogisticL2 {
    features: Array2<f64>,
    labels: Array1<f64>,
    mu: f64,
    smoothness: f64,
}

impl LogisticL2 {
    pub fn new(features: Array2<f64>, labels: Array1<f64>, mu: f64) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape(
                format!("{} labels", features.nrows()),
                format!("{} labels", labels.len()),
            ));
        }
        if features.nrows() == 0 {
            return Err(Error::Dataset("empty shard".into()));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Dataset("labels must be -1 or +1".into()));
        }
        let max_row_sq = features
            .rows()
            .into_iter()
            .map(|r| r.dot(&r))
            .fold(0.0f64, f64::max);
        Ok(LogisticL2 {
            features,
            labels,
            mu,
            smoothness: 0.25 * max_row_sq + mu,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let margins = self.features.dot(&x);
        let loss: f64 = margins
            .iter()
            .zip(self.labels.iter())
            .map(|(z, y)| softplus(-y * z))
            .sum();
        loss / self.labels.len() as f64 + 0.5 * self.mu * x.dot(&x)
    }

    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let m = self.labels.len() as f64;
        let margins = self.features.dot(&x);
        let coef: Array1<f64> = margins
            .iter()
            .zip(self.labels.iter())
            .map(|(z, y)| -y * sigmoid(-y * z) / m)
            .collect();
        let mut g = self.features.t().dot(&coef);
        g.scaled_add(self.mu, &x);
        g
    }

    fn sample_grad(&self, x: ArrayView1<'_, f64>, j: usize) -> Array1<f64> {
        let a = self.features.row(j);
        let y = self.labels[j];
        let c = -y * sigmoid(-y * a.dot(&x));
        let mut g = a.to_owned() * c;
        g.scaled_add(self.mu, &x);
        g
    }
}

/// `f(x) = 0.5 x^T H x - b^T x` with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    h: Array2<f64>,
    b: Array1<f64>,
    smoothness: f64,
    strong_convexity: f64,
}

impl Quadratic {
    pub fn new(h: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        let d = b.len();
        if h.dim() != (d, d) {
            return Err(Error::shape(format!("{d}x{d}"), format!("{:?}", h.dim())));
        }
        if h.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quadratic data".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if h[[i, j]] != h[[j, i]] {
                    return Err(Error::InvalidParameter("H must be symmetric".into()));
                }
            }
        }
        let eig = eigenvalues_of(&h);
        let (lo, hi) = (eig[0], eig[d - 1]);
        if lo <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "H must be positive definite, smallest eigenvalue {lo:e}"
            )));
        }
        Ok(Quadratic {
            h,
            b,
            smoothness: hi,
            strong_convexity: lo,
        })
    }

    pub fn h(&self) -> &Array2<f64> {
        &self.h
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    /// `f*(y) = 0.5 (y + b)^T H^{-1} (y + b)`.
    pub fn conjugate(&self, y: ArrayView1<'_, f64>) -> f64 {
        let z = &y + &self.b;
        let sol = solve_spd(&self.h, &z);
        0.5 * z.dot(&sol)
    }

    /// Unconstrained minimizer `H^{-1} b`.
    pub fn minimizer(&self) -> Array1<f64> {
        solve_spd(&self.h, &self.b)
    }
}

pub(crate) fn solve_spd(h: &Array2<f64>, rhs: &Array1<f64>) -> Array1<f64> {
    let d = rhs.len();
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| h[[i, j]]);
    let v = nalgebra::DVector::from_iterator(d, rhs.iter().copied());
    let sol = m
        .cholesky()
        .map(|c| c.solve(&v))
        .unwrap_or_else(|| nalgebra::DVector::zeros(d));
    Array1::from_iter(sol.iter().copied())
}

#[derive(Debug, Clone)]
pub enum LocalObjective {
    LogisticL2(LogisticL2),
    Quadratic(Quadratic),
}

impl LocalObjective {
    pub fn logistic(features: Array2<f64>, labels: Array1<f64>, mu: f64) -> Result<Self> {
        LogisticL2::new(features, labels, mu).map(LocalObjective::LogisticL2)
    }

    pub fn quadratic(h: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        Quadratic::new(h, b).map(LocalObjective::Quadratic)
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalObjective::LogisticL2(f) => f.features.ncols(),
            LocalObjective::Quadratic(f) => f.b.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LocalObjective::LogisticL2(_) => "logistic-l2",
            LocalObjective::Quadratic(_) => "quadratic",
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self {
            LocalObjective::LogisticL2(f) => f.smoothness,
            LocalObjective::Quadratic(f) => f.smoothness,
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            LocalObjective::LogisticL2(f) => f.mu,
            LocalObjective::Quadratic(f) => f.strong_convexity,
        }
    }

    /// Number of data points a stochastic oracle samples from (1 for quadratics).
    pub fn num_samples(&self) -> usize {
        match self {
            LocalObjective::LogisticL2(f) => f.labels.len(),
            LocalObjective::Quadratic(_) => 1,
        }
    }

    fn check_dim(&self, x: &ArrayView1<'_, f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!("dimension {}", self.dim()), x.len().to_string()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(&x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn grad(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(&x)?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            LocalObjective::LogisticL2(f) => f.value(x),
            LocalObjective::Quadratic(f) => 0.5 * x.dot(&f.h.dot(&x)) - f.b.dot(&x),
        }
    }

    pub(crate) fn grad_unchecked(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            LocalObjective::LogisticL2(f) => f.grad(x),
            LocalObjective::Quadratic(f) => f.h.dot(&x) - &f.b,
        }
    }

    /// Unbiased single-sample gradient; exact for quadratics.
    pub fn sample_grad(&self, x: ArrayView1<'_, f64>, sample: usize) -> Array1<f64> {
        match self {
            LocalObjective::LogisticL2(f) => f.sample_grad(x, sample),
            LocalObjective::Quadratic(_) => self.grad_unchecked(x),
        }
    }
}

/// `F(X) = sum_i f_i(x_i)`; its consensus restriction is `f(x) = sum_i f_i(x)`.
#[derive(Debug, Clone)]
pub struct GlobalObjective {
    locals: Vec<LocalObjective>,
    d: usize,
    smoothness: f64,
    strong_convexity: f64,
}

impl GlobalObjective {
    pub fn new(locals: Vec<LocalObjective>) -> Result<Self> {
        let d = locals
            .first()
            .map(LocalObjective::dim)
            .ok_or_else(|| Error::InvalidParameter("need at least one local objective".into()))?;
        if locals.iter().any(|f| f.dim() != d) {
            return Err(Error::shape(format!("dimension {d} for all agents"), "mixed dimensions"));
        }
        let smoothness = locals.iter().map(LocalObjective::smoothness).fold(0.0, f64::max);
        let strong_convexity = locals
            .iter()
            .map(LocalObjective::strong_convexity)
            .fold(f64::INFINITY, f64::min);
        Ok(GlobalObjective {
            locals,
            d,
            smoothness,
            strong_convexity,
        })
    }

    pub fn locals(&self) -> &[LocalObjective] {
        &self.locals
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `L = max_i L_i`
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    /// `mu = min_i mu_i`
    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn kappa_f(&self) -> f64 {
        self.smoothness / self.strong_convexity
    }

    pub fn is_quadratic(&self) -> bool {
        self.locals
            .iter()
            .all(|f| matches!(f, LocalObjective::Quadratic(_)))
    }

    fn check_shape(&self, x: &BlockVector) -> Result<()> {
        if x.shape() != (self.n(), self.d) {
            return Err(Error::shape(
                format!("({}, {})", self.n(), self.d),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    pub fn value(&self, x: &BlockVector) -> Result<f64> {
        self.check_shape(x)?;
        if !x.is_finite() {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        Ok(self
            .locals
            .iter()
            .enumerate()
            .map(|(i, f)| f.value_unchecked(x.row(i)))
            .sum())
    }

    pub fn grad(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check_shape(x)?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn grad_unchecked(&self, x: &BlockVector) -> BlockVector {
        let mut g = BlockVector::zeros(self.n(), self.d);
        for (i, f) in self.locals.iter().enumerate() {
            g.row_mut(i).assign(&f.grad_unchecked(x.row(i)));
        }
        g
    }

    /// Centralized objective `f(x) = sum_i f_i(x)`.
    pub fn consensus_value(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.locals.iter().map(|f| f.value(x)).sum()
    }

    pub fn consensus_grad(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mut g = Array1::zeros(self.d);
        for f in &self.locals {
            g += &f.grad(x)?;
        }
        Ok(g)
    }

    /// Minimizer of `f = sum_i f_i` by a direct solve; `None` unless every local is quadratic.
    pub fn quadratic_minimizer(&self) -> Option<Array1<f64>> {
        let mut h = Array2::<f64>::zeros((self.d, self.d));
        let mut b = Array1::<f64>::zeros(self.d);
        for f in &self.locals {
            let LocalObjective::Quadratic(q) = f else { return None };
            h += q.h();
            b += q.b();
        }
        Some(solve_spd(&h, &b))
    }

    /// `min_X F(X)`: every agent at its own minimizer. Exact for quadratics.
    pub fn separable_minimum(&self, tol: f64) -> Result<f64> {
        let mut total = 0.0;
        for f in &self.locals {
            let x = match f {
                LocalObjective::Quadratic(q) => q.minimizer(),
                LocalObjective::LogisticL2(_) => {
                    let single = GlobalObjective::new(vec![f.clone()])?;
                    reference_solution(&single, tol)?.x
                }
            };
            total += f.value_unchecked(x.view());
        }
        Ok(total)
    }
}

/// Minimizer of the centralized objective.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub x: Array1<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

const REFERENCE_MAX_ITERS: usize = 2_000_000;

/// Centralized Nesterov AGD on `f = sum_i f_i` until `|grad f| <= tol`.
pub fn reference_solution(f: &GlobalObjective, tol: f64) -> Result<ReferenceSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let l: f64 = f.locals.iter().map(LocalObjective::smoothness).sum();
    let mu: f64 = f.locals.iter().map(LocalObjective::strong_convexity).sum();
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("strong convexity must be positive".into()));
    }
    let q = (l / mu).sqrt();
    let beta = (q - 1.0) / (q + 1.0);
    let step = 1.0 / l;

    let mut x = Array1::<f64>::zeros(f.d);
    let mut y = x.clone();
    for it in 0..REFERENCE_MAX_ITERS {
        let g = f.consensus_grad(y.view())?;
        let gn = g.dot(&g).sqrt();
        if gn <= tol {
            let value = f.consensus_value(y.view())?;
            return Ok(ReferenceSolution {
                x: y,
                value,
                grad_norm: gn,
                iterations: it,
            });
        }
        let mut x_next = y.clone();
        x_next.scaled_add(-step, &g);
        y = &x_next + &((&x_next - &x) * beta);
        x = x_next;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(it));
        }
    }
    let g = f.consensus_grad(y.view())?;
    Err(Error::NoConvergence {
        solver: "reference AGD",
        iterations: REFERENCE_MAX_ITERS,
        residual: g.dot(&g).sqrt(),
    })
}
