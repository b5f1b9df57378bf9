//! Inner solvers for the augmented Lagrangian subproblem
//! `P(X) = F(X) + <Omega, X> + (rho/2) <X, M X>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockspace::BlockVector;
use crate::error::{Error, Result};
use crate::gossip::Metric;
use crate::objectives::{GlobalObjective, LocalObjective};

/// Iteration cap for accuracy-driven stopping.
pub const MAX_ACCURACY_ITERS: usize = 1_000_000;
const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    objective: &'a GlobalObjective,
    omega: &'a BlockVector,
    rho: f64,
    metric: &'a Metric,
}

impl<'a> Subproblem<'a> {
    pub fn new(
        objective: &'a GlobalObjective,
        omega: &'a BlockVector,
        rho: f64,
        metric: &'a Metric,
    ) -> Result<Self> {
        let shape = (objective.n(), objective.d());
        if omega.shape() != shape {
            return Err(Error::shape(format!("{shape:?}"), format!("{:?}", omega.shape())));
        }
        if metric.mixing().n() != objective.n() {
            return Err(Error::shape(
                format!("{} agents", objective.n()),
                format!("{} agents in the metric", metric.mixing().n()),
            ));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
        }
        Ok(Subproblem {
            objective,
            omega,
            rho,
            metric,
        })
    }

    pub fn objective(&self) -> &'a GlobalObjective {
        self.objective
    }

    pub fn omega(&self) -> &'a BlockVector {
        self.omega
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn metric(&self) -> &'a Metric {
        self.metric
    }

    /// `L + rho * lambda_max(M)`
    pub fn smoothness(&self) -> f64 {
        self.objective.smoothness() + self.rho * self.metric.spectrum().lambda_max
    }

    /// The regularizer is singular, so this is just `mu`.
    pub fn strong_convexity(&self) -> f64 {
        self.objective.strong_convexity()
    }

    pub fn kappa(&self) -> f64 {
        self.smoothness() / self.strong_convexity()
    }

    /// Communication rounds charged per gradient of `P`; none when `rho = 0`.
    pub fn rounds_per_grad(&self) -> usize {
        if self.rho == 0.0 {
            0
        } else {
            self.metric.rounds()
        }
    }

    fn check(&self, x: &BlockVector) -> Result<()> {
        self.omega.check_same_shape(x)?;
        if !x.is_finite() {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: &BlockVector) -> Result<f64> {
        self.check(x)?;
        let mut v = self.objective.value(x)? + self.omega.dot(x);
        if self.rho != 0.0 {
            v += 0.5 * self.rho * x.dot(&self.metric.apply_unchecked(x));
        }
        Ok(v)
    }

    pub fn grad(&self, x: &BlockVector) -> Result<BlockVector> {
        self.check(x)?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn grad_unchecked(&self, x: &BlockVector) -> BlockVector {
        let mut g = self.objective.grad_unchecked(x);
        g.axpy(1.0, self.omega);
        if self.rho != 0.0 {
            g.axpy(self.rho, &self.metric.apply_unchecked(x));
        }
        g
    }

    fn stochastic_grad(&self, x: &BlockVector, samples: &[usize]) -> BlockVector {
        let mut g = BlockVector::zeros(x.n(), x.d());
        for (i, f) in self.objective.locals().iter().enumerate() {
            g.row_mut(i).assign(&f.sample_grad(x.row(i), samples[i]));
        }
        g.axpy(1.0, self.omega);
        if self.rho != 0.0 {
            g.axpy(self.rho, &self.metric.apply_unchecked(x));
        }
        g
    }
}

#[derive(Debug, Clone)]
pub enum StoppingRule<'a> {
    /// Stop once `|X - X*|^2 <= epsilon` for the supplied exact minimizer.
    OptionI {
        epsilon: f64,
        reference: Option<&'a BlockVector>,
    },
    /// Run exactly this many iterations.
    OptionII { iterations: usize },
}

impl StoppingRule<'_> {
    fn validate(&self) -> Result<()> {
        match self {
            StoppingRule::OptionI { reference: None, .. } => Err(Error::MissingReference),
            StoppingRule::OptionI { epsilon, .. } if !(*epsilon >= 0.0) => {
                Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")))
            }
            StoppingRule::OptionII { iterations: 0 } => {
                Err(Error::InvalidParameter("option II needs at least one iteration".into()))
            }
            _ => Ok(()),
        }
    }

    fn done(&self, t: usize, x: &BlockVector) -> bool {
        match self {
            StoppingRule::OptionI {
                epsilon,
                reference: Some(r),
            } => x.dist_sq(r) <= *epsilon,
            StoppingRule::OptionI { .. } => true,
            StoppingRule::OptionII { iterations } => t >= *iterations,
        }
    }

    fn cap(&self) -> usize {
        match self {
            StoppingRule::OptionI { .. } => MAX_ACCURACY_ITERS,
            StoppingRule::OptionII { iterations } => *iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub grad_evals: usize,
    /// Communication rounds, including the warm-start round.
    pub mixing_rounds: usize,
    /// `|grad P|` at the returned point.
    pub grad_norm: f64,
}

struct Guard {
    limit: f64,
}

impl Guard {
    fn new(x0: &BlockVector) -> Self {
        Guard {
            limit: DIVERGENCE_FACTOR * x0.norm().max(1.0),
        }
    }

    fn check(&self, t: usize, x: &BlockVector) -> Result<()> {
        if !x.is_finite() || x.norm() > self.limit {
            return Err(Error::Diverged(t));
        }
        Ok(())
    }
}

fn finish(p: &Subproblem<'_>, x: BlockVector, iterations: usize) -> (BlockVector, SolverReport) {
    let r = p.rounds_per_grad();
    let grad_norm = p.grad_unchecked(&x).norm();
    let report = SolverReport {
        iterations,
        grad_evals: iterations,
        mixing_rounds: iterations * r + r,
        grad_norm,
    };
    (x, report)
}

fn run_loop(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    stop: &StoppingRule<'_>,
    name: &'static str,
    mut step: impl FnMut(usize, &mut BlockVector),
) -> Result<(BlockVector, SolverReport)> {
    p.check(x0)?;
    stop.validate()?;
    let guard = Guard::new(x0);
    let mut x = x0.clone();
    let mut t = 0;
    while !stop.done(t, &x) {
        if t >= stop.cap() {
            return Err(Error::NoConvergence {
                solver: name,
                iterations: t,
                residual: p.grad_unchecked(&x).norm(),
            });
        }
        step(t, &mut x);
        t += 1;
        guard.check(t, &x)?;
    }
    Ok(finish(p, x, t))
}

/// Gradient descent with a fixed step.
pub fn gd_solve(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    step: f64,
    stop: &StoppingRule<'_>,
) -> Result<(BlockVector, SolverReport)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    run_loop(p, x0, stop, "gradient descent", |_, x| {
        let g = p.grad_unchecked(x);
        x.axpy(-step, &g);
    })
}

/// Nesterov AGD with step `1 / L_P` and momentum from `kappa_P`.
pub fn agd_solve(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    stop: &StoppingRule<'_>,
) -> Result<(BlockVector, SolverReport)> {
    let (step, beta) = agd_constants(p);
    agd_solve_with(p, x0, step, beta, stop)
}

/// `(1 / L_P, (sqrt(kappa_P) - 1) / (sqrt(kappa_P) + 1))`
pub fn agd_constants(p: &Subproblem<'_>) -> (f64, f64) {
    let q = p.kappa().sqrt();
    (1.0 / p.smoothness(), (q - 1.0) / (q + 1.0))
}

pub fn agd_solve_with(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    step: f64,
    beta: f64,
    stop: &StoppingRule<'_>,
) -> Result<(BlockVector, SolverReport)> {
    if !(step > 0.0 && step.is_finite()) || !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("bad AGD constants step={step}, beta={beta}")));
    }
    let mut y = x0.clone();
    run_loop(p, x0, stop, "accelerated gradient", |_, x| {
        let g = p.grad_unchecked(&y);
        let mut x_next = y.clone();
        x_next.axpy(-step, &g);
        let diff = &x_next - x;
        y = x_next.clone();
        y.axpy(beta, &diff);
        *x = x_next;
    })
}

/// SGD drawing one sample per agent per step, step `1 / (mu (t + t0))`.
pub fn sgd_solve(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    seed: u64,
    stop: &StoppingRule<'_>,
) -> Result<(BlockVector, SolverReport)> {
    let mu = p.strong_convexity();
    let t0 = p.kappa().ceil();
    let sizes: Vec<usize> = p.objective.locals().iter().map(LocalObjective::num_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = vec![0; sizes.len()];
    run_loop(p, x0, stop, "stochastic gradient", |t, x| {
        for (s, &m) in samples.iter_mut().zip(&sizes) {
            *s = rng.random_range(0..m);
        }
        let g = p.stochastic_grad(x, &samples);
        x.axpy(-1.0 / (mu * (t as f64 + t0)), &g);
    })
}

/// Minimizes `P` to `|grad P| <= tol`: conjugate gradients with iterative
/// refinement for quadratics, AGD otherwise.
pub fn exact_solve(
    p: &Subproblem<'_>,
    x0: Option<&BlockVector>,
    tol: f64,
) -> Result<(BlockVector, SolverReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let start = x0.cloned().unwrap_or_else(|| BlockVector::zeros(p.objective.n(), p.objective.d()));
    p.check(&start)?;
    if p.objective.is_quadratic() {
        conjugate_gradient(p, start, tol)
    } else {
        agd_to_tolerance(p, start, tol)
    }
}

fn hessian_apply(p: &Subproblem<'_>, v: &BlockVector) -> BlockVector {
    let mut out = BlockVector::zeros(v.n(), v.d());
    for (i, f) in p.objective.locals().iter().enumerate() {
        if let LocalObjective::Quadratic(q) = f {
            out.row_mut(i).assign(&q.h().dot(&v.row(i)));
        }
    }
    if p.rho != 0.0 {
        out.axpy(p.rho, &p.metric.apply_unchecked(v));
    }
    out
}

const REFINEMENT_ROUNDS: usize = 30;

fn conjugate_gradient(
    p: &Subproblem<'_>,
    mut x: BlockVector,
    tol: f64,
) -> Result<(BlockVector, SolverReport)> {
    let dim = x.n() * x.d();
    let inner_cap = 2 * dim + 50;
    let mut products = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..REFINEMENT_ROUNDS {
        // r = -grad P(x), evaluated directly.
        let r0 = -&p.grad_unchecked(&x);
        residual = r0.norm();
        if residual <= tol {
            let r = p.rounds_per_grad();
            let report = SolverReport {
                iterations: products,
                grad_evals: products,
                mixing_rounds: products * r + r,
                grad_norm: residual,
            };
            return Ok((x, report));
        }
        // Solve H e = r0 by plain CG, then correct x.
        let mut e = BlockVector::zeros(x.n(), x.d());
        let mut r = r0.clone();
        let mut dir = r0;
        let mut rs = r.norm_sq();
        for _ in 0..inner_cap {
            let hd = hessian_apply(p, &dir);
            products += 1;
            let curv = dir.dot(&hd);
            if !(curv > 0.0) {
                break;
            }
            let alpha = rs / curv;
            e.axpy(alpha, &dir);
            r.axpy(-alpha, &hd);
            let rs_next = r.norm_sq();
            if rs_next.sqrt() <= 0.1 * tol {
                break;
            }
            let beta = rs_next / rs;
            rs = rs_next;
            let mut next = r.clone();
            next.axpy(beta, &dir);
            dir = next;
        }
        x.axpy(1.0, &e);
        if !x.is_finite() {
            return Err(Error::Diverged(products));
        }
    }
    Err(Error::NoConvergence {
        solver: "conjugate gradient",
        iterations: products,
        residual,
    })
}

fn agd_to_tolerance(
    p: &Subproblem<'_>,
    x0: BlockVector,
    tol: f64,
) -> Result<(BlockVector, SolverReport)> {
    let (step, beta) = agd_constants(p);
    let guard = Guard::new(&x0);
    let mut x = x0.clone();
    let mut y = x0;
    let r = p.rounds_per_grad();
    for t in 0..MAX_ACCURACY_ITERS {
        let g = p.grad_unchecked(&y);
        let gn = g.norm();
        if gn <= tol {
            let report = SolverReport {
                iterations: t,
                grad_evals: t + 1,
                mixing_rounds: (t + 1) * r + r,
                grad_norm: gn,
            };
            return Ok((y, report));
        }
        let mut x_next = y.clone();
        x_next.axpy(-step, &g);
        let diff = &x_next - &x;
        y = x_next.clone();
        y.axpy(beta, &diff);
        x = x_next;
        guard.check(t + 1, &y)?;
    }
    Err(Error::NoConvergence {
        solver: "accelerated gradient",
        iterations: MAX_ACCURACY_ITERS,
        residual: p.grad_unchecked(&y).norm(),
    })
}
