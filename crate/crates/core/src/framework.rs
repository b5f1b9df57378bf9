//! Outer loops: augmented Lagrangian (plain and accelerated), IDEAL, MIDEAL,
//! their zero-regularization dual special cases, EXTRA and DGD.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::blockspace::{consensus_gap, consensus_mean, mix_unchecked, BlockVector};
use crate::error::{Error, Result};
use crate::gossip::Metric;
use crate::objectives::{reference_solution, GlobalObjective};
use crate::solvers::{
    agd_constants, agd_solve_with, exact_solve, gd_solve, sgd_solve, SolverReport, StoppingRule,
    Subproblem,
};
use crate::topology::{spectrum, MixingMatrix, MixingSource, SpectralSummary, TOL_SPECTRAL};

/// Moduli and step sizes of the accelerated outer loop for a metric `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub rho: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub lambda_max: f64,
    pub lambda_min_plus: f64,
    pub l_rho: f64,
    pub mu_rho: f64,
    pub kappa_rho: f64,
    pub c_rho: f64,
    pub eta: f64,
    pub beta: f64,
    pub delta_dual: f64,
}

impl ScheduleParams {
    pub fn compute(
        spec: &SpectralSummary,
        smoothness: f64,
        strong_convexity: f64,
        rho: f64,
        delta_dual: f64,
    ) -> Result<Self> {
        let (l, mu) = (smoothness, strong_convexity);
        if !(mu > 0.0 && l >= mu && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("need 0 < mu <= L, got mu={mu}, L={l}")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
        }
        if !(delta_dual >= 0.0 && delta_dual.is_finite()) {
            return Err(Error::InvalidParameter(format!("dual gap must be >= 0, got {delta_dual}")));
        }
        let (lmax, lmin) = (spec.lambda_max, spec.lambda_min_plus);
        let l_rho = lmax / (mu + rho * lmax);
        let mu_rho = lmin / (l + rho * lmin);
        let (sl, sm) = (l_rho.sqrt(), mu_rho.sqrt());
        Ok(ScheduleParams {
            rho,
            smoothness: l,
            strong_convexity: mu,
            lambda_max: lmax,
            lambda_min_plus: lmin,
            l_rho,
            mu_rho,
            kappa_rho: l_rho / mu_rho,
            c_rho: 258.0 * l_rho * lmax / (mu * mu * mu_rho * mu_rho),
            eta: 1.0 / l_rho,
            beta: ((sl - sm) / (sl + sm)).max(0.0),
            delta_dual,
        })
    }

    /// `1 - sqrt(mu_rho / L_rho) / 2`
    pub fn rate(&self) -> f64 {
        1.0 - 0.5 * (self.mu_rho / self.l_rho).sqrt()
    }

    /// Inner accuracy target of outer iteration `k`.
    pub fn epsilon(&self, k: usize) -> f64 {
        self.mu_rho / (2.0 * self.lambda_max) * self.rate().powi(k as i32) * self.delta_dual
    }

    /// Upper envelope on `|X_k - X*|^2`.
    pub fn envelope(&self, k: usize) -> f64 {
        self.c_rho * self.rate().powi(k as i32) * self.delta_dual
    }

    /// Upper bound on `|X_{k-1} - X*_k|^2`.
    pub fn warm_start_bound(&self, k: usize) -> f64 {
        8.0 * self.c_rho * self.epsilon(k.saturating_sub(1)) / self.mu_rho
    }

    pub fn outer_iterations(&self, epsilon: f64) -> usize {
        outer_iterations(self.kappa_rho, self.c_rho * self.delta_dual / epsilon)
    }

    /// Linear-rate inner budget: `multiplier * kappa_inner^p * ln(16 C_rho / mu_rho)`
    /// with `p = 1` for GD and `p = 1/2` for AGD, where
    /// `kappa_inner = (L + rho lambda_max) / mu`. The log argument is the gap
    /// reduction each warm-started subproblem needs.
    pub fn inner_budget(&self, inner: &InnerSolver, multiplier: f64) -> Result<usize> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::InvalidParameter(format!("budget multiplier must be positive, got {multiplier}")));
        }
        let kappa_inner = (self.smoothness + self.rho * self.lambda_max) / self.strong_convexity;
        let factor = match inner {
            InnerSolver::Gd { .. } => kappa_inner,
            InnerSolver::Agd { .. } => kappa_inner.sqrt(),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "theoretical budgets need a linearly convergent inner solver, not {}",
                    other.name()
                )))
            }
        };
        let log = (16.0 * self.c_rho / self.mu_rho).ln().max(1.0);
        Ok((multiplier * factor * log - 1e-9).ceil().max(1.0) as usize)
    }
}

/// `ceil(2 sqrt(kappa_rho) ln(ratio))`, at least 1, where `ratio = C_rho Delta / epsilon`.
pub fn outer_iterations(kappa_rho: f64, ratio: f64) -> usize {
    let k = 2.0 * kappa_rho.sqrt() * ratio.ln();
    if !(k > 1.0) {
        return 1;
    }
    (k - 1e-9).ceil().max(1.0) as usize
}

/// Time units of the lower bound with unit constant.
pub fn lower_bound_curve(kappa_f: f64, kappa_w: f64, tau: f64, epsilon: f64) -> f64 {
    kappa_f.sqrt() * (1.0 + tau * kappa_w.sqrt()) * (1.0 / epsilon).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Dgd,
    Al,
    AccAl,
    Ideal,
    Mideal,
    Extra,
    Ssda,
    Msda,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Dgd,
        Algorithm::Al,
        Algorithm::AccAl,
        Algorithm::Ideal,
        Algorithm::Mideal,
        Algorithm::Extra,
        Algorithm::Ssda,
        Algorithm::Msda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dgd => "dgd",
            Algorithm::Al => "al",
            Algorithm::AccAl => "acc-al",
            Algorithm::Ideal => "ideal",
            Algorithm::Mideal => "mideal",
            Algorithm::Extra => "extra",
            Algorithm::Ssda => "ssda",
            Algorithm::Msda => "msda",
        }
    }

    fn is_augmented_lagrangian(self) -> bool {
        !matches!(self, Algorithm::Dgd | Algorithm::Extra)
    }

    fn uses_chebyshev(self) -> bool {
        matches!(self, Algorithm::Mideal | Algorithm::Msda)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolver {
    /// Gradient descent; default step `1 / L_P`.
    Gd { step: Option<f64> },
    /// Nesterov AGD; default momentum from `kappa_P`.
    Agd { beta: Option<f64> },
    Sgd,
    /// Solve to `|grad P| <= tol`.
    Exact { tol: f64 },
}

impl InnerSolver {
    pub fn name(&self) -> &'static str {
        match self {
            InnerSolver::Gd { .. } => "gd",
            InnerSolver::Agd { .. } => "agd",
            InnerSolver::Sgd => "sgd",
            InnerSolver::Exact { .. } => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerStop {
    /// Option I with the epsilon schedule; needs exact per-subproblem minimizers.
    Accuracy,
    /// Option II with a fixed budget.
    Fixed(usize),
    /// Option II with the theoretical GD/AGD budget scaled by the multiplier.
    Theory(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoPolicy {
    Default,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    /// `1 / L_rho`
    Theory,
    /// `eta = rho`, the per-agent implementation shortcut.
    Rho,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    Theory,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// `f(X_0 consensus) - f(x*)`
    Estimate,
    /// `f(x*) - sum_i min f_i`
    Exact,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub inner: InnerSolver,
    pub stop: InnerStop,
    pub rho: RhoPolicy,
    pub eta: EtaPolicy,
    pub beta: BetaPolicy,
    pub delta: DeltaPolicy,
    pub max_outer: usize,
    /// Stop once the consensus suboptimality drops to this level.
    pub target: Option<f64>,
    pub seed: u64,
    /// Step of EXTRA and DGD; defaults `1 / (2L)` and `1 / L`.
    pub step: Option<f64>,
    /// Accuracy of the exact per-subproblem minimizers used by Option I.
    pub reference_tol: f64,
    /// Option I runs stop once `epsilon_k` falls below this floor.
    pub epsilon_floor: f64,
    pub record_iterates: bool,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        let inner = match algorithm {
            Algorithm::Al | Algorithm::AccAl => InnerSolver::Exact { tol: 1e-12 },
            _ => InnerSolver::Agd { beta: None },
        };
        AlgorithmConfig {
            algorithm,
            inner,
            stop: InnerStop::Fixed(100),
            rho: RhoPolicy::Default,
            eta: EtaPolicy::Theory,
            beta: BetaPolicy::Theory,
            delta: DeltaPolicy::Estimate,
            max_outer: 100,
            target: None,
            seed: 0,
            step: None,
            reference_tol: 1e-13,
            epsilon_floor: 0.0,
            record_iterates: false,
        }
    }
}

/// Problem data shared by every run: objective, network and the optimum.
#[derive(Debug, Clone)]
pub struct Problem {
    objective: GlobalObjective,
    mixing: MixingMatrix,
    x_star: Option<Array1<f64>>,
    f_star: Option<f64>,
}

impl Problem {
    pub fn new(objective: GlobalObjective, mixing: MixingMatrix) -> Result<Self> {
        if objective.n() != mixing.n() {
            return Err(Error::shape(
                format!("{} agents", objective.n()),
                format!("{} agents in the mixing matrix", mixing.n()),
            ));
        }
        Ok(Problem {
            objective,
            mixing,
            x_star: None,
            f_star: None,
        })
    }

    /// Attaches the centralized optimum: a direct solve for quadratics,
    /// otherwise AGD to `|grad f| <= tol`.
    pub fn with_reference(mut self, tol: f64) -> Result<Self> {
        let x = match self.objective.quadratic_minimizer() {
            Some(x) => x,
            None => reference_solution(&self.objective, tol)?.x,
        };
        self.f_star = Some(self.objective.consensus_value(x.view())?);
        self.x_star = Some(x);
        Ok(self)
    }

    pub fn objective(&self) -> &GlobalObjective {
        &self.objective
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn x_star(&self) -> Option<&Array1<f64>> {
        self.x_star.as_ref()
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn n(&self) -> usize {
        self.objective.n()
    }

    pub fn d(&self) -> usize {
        self.objective.d()
    }

    /// `1 (x) x*`
    pub fn x_star_block(&self) -> Option<BlockVector> {
        self.x_star.as_ref().map(|x| BlockVector::consensus(self.n(), x.view()))
    }

    /// `f(mean X) - f*`, clamped at zero; NaN without a reference.
    pub fn suboptimality(&self, x: &BlockVector) -> Result<f64> {
        let Some(f_star) = self.f_star else { return Ok(f64::NAN) };
        let v = self.objective.consensus_value(consensus_mean(x).view())? - f_star;
        if !v.is_finite() {
            return Err(Error::NonFinite("suboptimality".into()));
        }
        Ok(v.max(0.0))
    }

    fn delta_dual(&self, policy: DeltaPolicy) -> Result<f64> {
        match policy {
            DeltaPolicy::Explicit(v) => Ok(v),
            DeltaPolicy::Estimate => {
                let f_star = self.f_star.ok_or(Error::MissingReference)?;
                let zero = Array1::zeros(self.d());
                Ok((self.objective.consensus_value(zero.view())? - f_star).max(0.0))
            }
            DeltaPolicy::Exact => {
                let f_star = self.f_star.ok_or(Error::MissingReference)?;
                Ok((f_star - self.objective.separable_minimum(1e-12)?).max(0.0))
            }
        }
    }
}

/// Table-1 regularization: `L / lambda_max(M)` for deterministic solvers,
/// `L / lambda_min^+(M)` for SGD.
pub fn default_rho(inner: &InnerSolver, spec: &SpectralSummary, smoothness: f64) -> f64 {
    match inner {
        InnerSolver::Sgd => smoothness / spec.lambda_min_plus,
        _ => smoothness / spec.lambda_max,
    }
}

/// One outer iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub k: usize,
    pub inner_iterations: usize,
    pub grad_evals: usize,
    pub mixing_rounds: usize,
    pub suboptimality: f64,
    pub consensus_gap: f64,
    /// `|X_k - X*|^2` when the optimum is known.
    pub dist_sq: Option<f64>,
    /// Largest column sum of `Lambda_k` or `Omega_k`, divided by `1 + |Lambda_k|`.
    pub dual_drift: f64,
    /// Option I: `|X_{k-1} - X*_k|^2` and `epsilon_k`.
    pub warm_start_gap: Option<f64>,
    pub epsilon: Option<f64>,
    pub inner_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub schedule: Option<ScheduleParams>,
    /// Communication rounds per application of the metric.
    pub metric_rounds: usize,
    pub records: Vec<OuterRecord>,
    pub x: BlockVector,
    pub lambda: Option<BlockVector>,
    pub omega: Option<BlockVector>,
    pub iterates: Vec<BlockVector>,
    /// Option I run ended early at the epsilon floor.
    pub truncated: bool,
}

fn dual_drift(lambda: &BlockVector, omega: &BlockVector) -> f64 {
    let worst = |v: &BlockVector| v.column_sums().iter().fold(0.0f64, |m, s| m.max(s.abs()));
    worst(lambda).max(worst(omega)) / (1.0 + lambda.norm())
}

struct AlState {
    metric: Metric,
    params: ScheduleParams,
    x: BlockVector,
    lambda: BlockVector,
    omega: BlockVector,
}

struct ExtraState {
    m: Array2<f64>,
    alpha: f64,
    rho: f64,
    eta: f64,
    prev: Option<(BlockVector, BlockVector, BlockVector)>,
    x: BlockVector,
}

struct DgdState {
    w_ds: Array2<f64>,
    step: f64,
    x: BlockVector,
}

enum State {
    Al(Box<AlState>),
    Extra(ExtraState),
    Dgd(DgdState),
}

/// Step-wise executor of one configured algorithm.
pub struct Runner<'a> {
    problem: &'a Problem,
    config: AlgorithmConfig,
    k: usize,
    state: State,
    x_star: Option<BlockVector>,
    truncated: bool,
}

/// `I - W / lambda_max(W)`, symmetric, doubly stochastic and PSD for a
/// connected Laplacian.
pub fn averaging_operator(w: &MixingMatrix) -> Result<Array2<f64>> {
    let spec = spectrum(w)?;
    let n = w.n();
    let w_ds = Array2::eye(n) - &(w.entries() / spec.lambda_max);
    let radius = 1.0 - spec.eigenvalues[0] / spec.lambda_max;
    if radius > 1.0 + TOL_SPECTRAL {
        return Err(Error::InvalidMixing(format!("averaging operator has spectral radius {radius}")));
    }
    Ok(w_ds)
}

/// Metric `I - W_DS` used by EXTRA: the input itself if it came from a
/// doubly stochastic matrix, otherwise `W / lambda_max(W)`.
pub fn extra_metric(w: &MixingMatrix) -> Result<Array2<f64>> {
    if w.source() == MixingSource::FromDoublyStochastic {
        return Ok(w.entries().clone());
    }
    let spec = spectrum(w)?;
    Ok(w.entries() / spec.lambda_max)
}

impl<'a> Runner<'a> {
    pub fn new(problem: &'a Problem, config: AlgorithmConfig) -> Result<Self> {
        let n = problem.n();
        let d = problem.d();
        let f = problem.objective();
        let x0 = BlockVector::zeros(n, d);
        let state = match config.algorithm {
            Algorithm::Extra => {
                let alpha = config.step.unwrap_or(0.5 / f.smoothness());
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!("EXTRA step must be positive, got {alpha}")));
                }
                let rho = 0.5 / alpha;
                State::Extra(ExtraState {
                    m: extra_metric(problem.mixing())?,
                    alpha,
                    rho,
                    eta: rho,
                    prev: None,
                    x: x0,
                })
            }
            Algorithm::Dgd => {
                let step = config.step.unwrap_or(1.0 / f.smoothness());
                if !(step > 0.0) {
                    return Err(Error::InvalidParameter(format!("DGD step must be positive, got {step}")));
                }
                State::Dgd(DgdState {
                    w_ds: averaging_operator(problem.mixing())?,
                    step,
                    x: x0,
                })
            }
            alg => {
                let metric = if alg.uses_chebyshev() {
                    Metric::chebyshev(problem.mixing().clone())?
                } else {
                    Metric::plain(problem.mixing().clone())?
                };
                let rho = match (alg, config.rho) {
                    (Algorithm::Ssda | Algorithm::Msda, _) => 0.0,
                    (_, RhoPolicy::Explicit(r)) => r,
                    (_, RhoPolicy::Default) => default_rho(&config.inner, metric.spectrum(), f.smoothness()),
                };
                let delta = match (config.delta, config.stop) {
                    (DeltaPolicy::Explicit(v), _) => v,
                    (policy, InnerStop::Accuracy) => problem.delta_dual(policy)?,
                    (policy, _) => problem.delta_dual(policy).unwrap_or(f64::NAN),
                };
                let mut params = ScheduleParams::compute(
                    metric.spectrum(),
                    f.smoothness(),
                    f.strong_convexity(),
                    rho,
                    if delta.is_nan() { 0.0 } else { delta },
                )?;
                if delta.is_nan() {
                    params.delta_dual = f64::NAN;
                }
                params.eta = match config.eta {
                    EtaPolicy::Theory => params.eta,
                    EtaPolicy::Rho => rho,
                    EtaPolicy::Explicit(v) => v,
                };
                params.beta = match (alg, config.beta) {
                    (Algorithm::Al, _) => 0.0,
                    (_, BetaPolicy::Explicit(b)) => b,
                    (_, BetaPolicy::Theory) => params.beta,
                };
                if !(0.0..1.0).contains(&params.beta) || !(params.eta >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "outer constants out of range: eta={}, beta={}",
                        params.eta, params.beta
                    )));
                }
                State::Al(Box::new(AlState {
                    metric,
                    params,
                    lambda: x0.clone(),
                    omega: x0.clone(),
                    x: x0,
                }))
            }
        };
        Ok(Runner {
            problem,
            x_star: problem.x_star_block(),
            config,
            k: 0,
            state,
            truncated: false,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &BlockVector {
        match &self.state {
            State::Al(s) => &s.x,
            State::Extra(s) => &s.x,
            State::Dgd(s) => &s.x,
        }
    }

    pub fn duals(&self) -> Option<(&BlockVector, &BlockVector)> {
        match &self.state {
            State::Al(s) => Some((&s.lambda, &s.omega)),
            _ => None,
        }
    }

    pub fn schedule(&self) -> Option<&ScheduleParams> {
        match &self.state {
            State::Al(s) => Some(&s.params),
            _ => None,
        }
    }

    pub fn metric(&self) -> Option<&Metric> {
        match &self.state {
            State::Al(s) => Some(&s.metric),
            _ => None,
        }
    }

    pub fn metric_rounds(&self) -> usize {
        self.metric().map_or(1, Metric::rounds)
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Runs one outer iteration; `None` once an Option I run hits the epsilon floor.
    pub fn step(&mut self) -> Result<Option<OuterRecord>> {
        let k = self.k + 1;
        let problem = self.problem;
        let config = &self.config;
        let mut record = match &mut self.state {
            State::Al(s) => {
                let Some(r) = al_step(problem, config, s, k)? else {
                    self.truncated = true;
                    return Ok(None);
                };
                r
            }
            State::Extra(s) => extra_step(problem, s, k),
            State::Dgd(s) => dgd_step(problem, s, k),
        };
        self.k = k;
        let x = self.x();
        if !x.is_finite() {
            return Err(Error::Diverged(k));
        }
        record.suboptimality = problem.suboptimality(x)?;
        record.consensus_gap = consensus_gap(x);
        record.dist_sq = self.x_star.as_ref().map(|xs| x.dist_sq(xs));
        Ok(Some(record))
    }

    /// Runs to `max_outer`, the target, or the epsilon floor.
    pub fn run(mut self) -> Result<RunTrace> {
        let mut records = Vec::new();
        let mut iterates = Vec::new();
        while self.k < self.config.max_outer {
            let Some(r) = self.step()? else { break };
            let reached = self.config.target.is_some_and(|t| r.suboptimality <= t);
            records.push(r);
            if self.config.record_iterates {
                iterates.push(self.x().clone());
            }
            if reached {
                break;
            }
        }
        let metric_rounds = self.metric_rounds();
        let truncated = self.truncated;
        let algorithm = self.config.algorithm;
        let (schedule, x, lambda, omega) = match self.state {
            State::Al(s) => {
                let s = *s;
                (Some(s.params), s.x, Some(s.lambda), Some(s.omega))
            }
            State::Extra(s) => (None, s.x, None, None),
            State::Dgd(s) => (None, s.x, None, None),
        };
        Ok(RunTrace {
            algorithm,
            schedule,
            metric_rounds,
            records,
            x,
            lambda,
            omega,
            iterates,
            truncated,
        })
    }
}

fn blank_record(k: usize) -> OuterRecord {
    OuterRecord {
        k,
        inner_iterations: 0,
        grad_evals: 0,
        mixing_rounds: 0,
        suboptimality: f64::NAN,
        consensus_gap: 0.0,
        dist_sq: None,
        dual_drift: 0.0,
        warm_start_gap: None,
        epsilon: None,
        inner_grad_norm: f64::NAN,
    }
}

fn al_step(
    problem: &Problem,
    config: &AlgorithmConfig,
    s: &mut AlState,
    k: usize,
) -> Result<Option<OuterRecord>> {
    let f = problem.objective();
    let p = Subproblem::new(f, &s.omega, s.params.rho, &s.metric)?;
    let mut record = blank_record(k);

    let (x_next, report): (BlockVector, SolverReport) = match (config.inner, config.stop) {
        (InnerSolver::Exact { tol }, _) => exact_solve(&p, Some(&s.x), tol)?,
        (inner, InnerStop::Fixed(t)) => {
            let stop = StoppingRule::OptionII { iterations: t };
            inner_solve(&p, &s.x, inner, config.seed, k, &stop)?
        }
        (inner, InnerStop::Theory(m)) => {
            let stop = StoppingRule::OptionII {
                iterations: s.params.inner_budget(&inner, m)?,
            };
            inner_solve(&p, &s.x, inner, config.seed, k, &stop)?
        }
        (inner, InnerStop::Accuracy) => {
            let eps = s.params.epsilon(k);
            if eps < config.epsilon_floor {
                return Ok(None);
            }
            let (x_ref, _) = exact_solve(&p, Some(&s.x), config.reference_tol)?;
            record.warm_start_gap = Some(s.x.dist_sq(&x_ref));
            record.epsilon = Some(eps);
            let stop = StoppingRule::OptionI {
                epsilon: eps,
                reference: Some(&x_ref),
            };
            inner_solve(&p, &s.x, inner, config.seed, k, &stop)?
        }
    };

    // Lambda_{k+1} = Omega_k + eta M X_k;  Omega_{k+1} = Lambda_{k+1} + beta (Lambda_{k+1} - Lambda_k)
    let mx = s.metric.apply_unchecked(&x_next);
    let mut lambda_next = s.omega.clone();
    lambda_next.axpy(s.params.eta, &mx);
    let diff = &lambda_next - &s.lambda;
    let mut omega_next = lambda_next.clone();
    omega_next.axpy(s.params.beta, &diff);

    s.x = x_next;
    s.lambda = lambda_next;
    s.omega = omega_next;

    record.inner_iterations = report.iterations;
    record.grad_evals = report.grad_evals;
    record.mixing_rounds = report.mixing_rounds + s.metric.rounds();
    record.inner_grad_norm = report.grad_norm;
    record.dual_drift = dual_drift(&s.lambda, &s.omega);
    Ok(Some(record))
}

fn inner_solve(
    p: &Subproblem<'_>,
    x0: &BlockVector,
    inner: InnerSolver,
    seed: u64,
    k: usize,
    stop: &StoppingRule<'_>,
) -> Result<(BlockVector, SolverReport)> {
    match inner {
        InnerSolver::Gd { step } => gd_solve(p, x0, step.unwrap_or(1.0 / p.smoothness()), stop),
        InnerSolver::Agd { beta } => {
            let (step, b) = agd_constants(p);
            agd_solve_with(p, x0, step, beta.unwrap_or(b), stop)
        }
        InnerSolver::Sgd => sgd_solve(p, x0, seed.wrapping_add(k as u64), stop),
        InnerSolver::Exact { tol } => exact_solve(p, Some(x0), tol),
    }
}

fn extra_step(problem: &Problem, s: &mut ExtraState, k: usize) -> OuterRecord {
    let f = problem.objective();
    let g = f.grad_unchecked(&s.x);
    let mx = mix_unchecked(&s.m, &s.x);
    let next = match &s.prev {
        // X_1 = X_0 - alpha (grad F(X_0) + rho M X_0)
        None => {
            let mut dir = g.clone();
            dir.axpy(s.rho, &mx);
            let mut next = s.x.clone();
            next.axpy(-s.alpha, &dir);
            next
        }
        // X_{k+1} = 2 X_k - alpha (rho + eta) M X_k - X_{k-1} + alpha rho M X_{k-1}
        //           - alpha (grad F(X_k) - grad F(X_{k-1}))
        Some((x_prev, mx_prev, g_prev)) => {
            let mut next = s.x.scaled(2.0);
            next.axpy(-s.alpha * (s.rho + s.eta), &mx);
            next.axpy(-1.0, x_prev);
            next.axpy(s.alpha * s.rho, mx_prev);
            next.axpy(-s.alpha, &(&g - g_prev));
            next
        }
    };
    let x_prev = std::mem::replace(&mut s.x, next);
    s.prev = Some((x_prev, mx, g));
    let mut record = blank_record(k);
    record.inner_iterations = 1;
    record.grad_evals = 1;
    record.mixing_rounds = 1;
    record
}

fn dgd_step(problem: &Problem, s: &mut DgdState, k: usize) -> OuterRecord {
    let g = problem.objective().grad_unchecked(&s.x);
    let mut next = mix_unchecked(&s.w_ds, &s.x);
    next.axpy(-s.step, &g);
    s.x = next;
    let mut record = blank_record(k);
    record.inner_iterations = 1;
    record.grad_evals = 1;
    record.mixing_rounds = 1;
    record
}

pub fn run(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    Runner::new(problem, config)?.run()
}

fn with_algorithm(mut config: AlgorithmConfig, algorithm: Algorithm) -> AlgorithmConfig {
    config.algorithm = algorithm;
    config
}

pub fn run_al(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Al))
}

pub fn run_acc_al(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::AccAl))
}

pub fn run_ideal(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Ideal))
}

pub fn run_mideal(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Mideal))
}

pub fn run_ssda(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Ssda))
}

pub fn run_msda(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Msda))
}

pub fn run_extra(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Extra))
}

pub fn run_dgd(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    run(problem, with_algorithm(config, Algorithm::Dgd))
}

/// One node of the per-agent execution: local state plus its weighted neighborhood.
struct Agent {
    /// `(j, W_ij)` over nonzero weights, increasing `j`, self included.
    weights: Vec<(usize, f64)>,
    x: Array1<f64>,
    lambda: Array1<f64>,
    omega: Array1<f64>,
}

/// One synchronous gossip round: every agent averages its neighbors' values.
fn gossip_round(agents: &[Agent], values: &[Array1<f64>]) -> Vec<Array1<f64>> {
    agents
        .iter()
        .map(|a| {
            let mut acc = Array1::zeros(values[0].len());
            for &(j, w) in &a.weights {
                acc.scaled_add(w, &values[j]);
            }
            acc
        })
        .collect()
}

/// IDEAL with a GD or AGD inner loop executed node by node, with neighbor
/// averaging as the only coupling. Produces the same records as [`run`].
pub fn run_ideal_per_agent(problem: &Problem, config: AlgorithmConfig) -> Result<RunTrace> {
    let alg = config.algorithm;
    if !alg.is_augmented_lagrangian() || alg.uses_chebyshev() {
        return Err(Error::InvalidParameter(format!(
            "per-agent execution supports plain-metric augmented Lagrangian runs, not {alg}"
        )));
    }
    let InnerStop::Fixed(t_inner) = config.stop else {
        return Err(Error::InvalidParameter("per-agent execution needs a fixed inner budget".into()));
    };
    // Reuse the matrix-form setup for the schedule so both paths share constants.
    let setup = Runner::new(problem, config.clone())?;
    let metric = setup.metric().expect("augmented Lagrangian runner has a metric");
    let params = setup.schedule().expect("augmented Lagrangian runner has a schedule").clone();
    let f = problem.objective();
    let probe_omega = BlockVector::zeros(problem.n(), problem.d());
    let p = Subproblem::new(f, &probe_omega, params.rho, metric)?;
    let (step, beta_inner) = match config.inner {
        InnerSolver::Gd { step } => (step.unwrap_or(1.0 / p.smoothness()), 0.0),
        InnerSolver::Agd { beta } => {
            let (s, b) = agd_constants(&p);
            (s, beta.unwrap_or(b))
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "per-agent execution supports gd and agd inner solvers, not {}",
                other.name()
            )))
        }
    };
    let is_gd = matches!(config.inner, InnerSolver::Gd { .. });
    let rho = params.rho;
    let w = problem.mixing();
    let (n, d) = (problem.n(), problem.d());
    let mut agents: Vec<Agent> = (0..n)
        .map(|i| Agent {
            weights: (0..n).filter(|&j| w.get(i, j) != 0.0).map(|j| (j, w.get(i, j))).collect(),
            x: Array1::zeros(d),
            lambda: Array1::zeros(d),
            omega: Array1::zeros(d),
        })
        .collect();
    let x_star = problem.x_star_block();
    let assemble = |rows: &[Array1<f64>]| {
        let mut b = BlockVector::zeros(n, d);
        for (i, r) in rows.iter().enumerate() {
            b.row_mut(i).assign(r);
        }
        b
    };

    let mut records = Vec::new();
    let mut iterates = Vec::new();
    for k in 1..=config.max_outer {
        let mut rounds = 0;
        // Warm start at x_i(k-1).
        let mut xs: Vec<Array1<f64>> = agents.iter().map(|a| a.x.clone()).collect();
        let mut ys = xs.clone();
        let mut ybar = if rho != 0.0 {
            rounds += 1;
            Some(gossip_round(&agents, &ys))
        } else {
            None
        };
        for _ in 0..t_inner {
            for (i, a) in agents.iter().enumerate() {
                let mut g = f.locals()[i].grad_unchecked(ys[i].view());
                g.scaled_add(1.0, &a.omega);
                if let Some(yb) = &ybar {
                    g.scaled_add(rho, &yb[i]);
                }
                let mut x_next = ys[i].clone();
                x_next.scaled_add(-step, &g);
                if is_gd {
                    ys[i] = x_next.clone();
                } else {
                    let diff = &x_next - &xs[i];
                    let mut y = x_next.clone();
                    y.scaled_add(beta_inner, &diff);
                    ys[i] = y;
                }
                xs[i] = x_next;
            }
            if rho != 0.0 {
                rounds += 1;
                ybar = Some(gossip_round(&agents, &ys));
            }
        }
        let xbar = gossip_round(&agents, &xs);
        rounds += 1;
        let inner_grad: Vec<Array1<f64>> = agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut g = f.locals()[i].grad_unchecked(xs[i].view());
                g.scaled_add(1.0, &a.omega);
                if rho != 0.0 {
                    g.scaled_add(rho, &xbar[i]);
                }
                g
            })
            .collect();
        for (i, a) in agents.iter_mut().enumerate() {
            let mut lambda_next = a.omega.clone();
            lambda_next.scaled_add(params.eta, &xbar[i]);
            let diff = &lambda_next - &a.lambda;
            let mut omega_next = lambda_next.clone();
            omega_next.scaled_add(params.beta, &diff);
            a.x = xs[i].clone();
            a.lambda = lambda_next;
            a.omega = omega_next;
        }

        let x = assemble(&xs);
        if !x.is_finite() {
            return Err(Error::Diverged(k));
        }
        let lambda = assemble(&agents.iter().map(|a| a.lambda.clone()).collect::<Vec<_>>());
        let omega = assemble(&agents.iter().map(|a| a.omega.clone()).collect::<Vec<_>>());
        let mut record = blank_record(k);
        record.inner_iterations = t_inner;
        record.grad_evals = t_inner;
        record.mixing_rounds = rounds;
        record.inner_grad_norm = assemble(&inner_grad).norm();
        record.dual_drift = dual_drift(&lambda, &omega);
        record.suboptimality = problem.suboptimality(&x)?;
        record.consensus_gap = consensus_gap(&x);
        record.dist_sq = x_star.as_ref().map(|xs| x.dist_sq(xs));
        let reached = config.target.is_some_and(|t| record.suboptimality <= t);
        records.push(record);
        if config.record_iterates {
            iterates.push(x);
        }
        if reached {
            break;
        }
    }
    let rows = |sel: fn(&Agent) -> &Array1<f64>| assemble(&agents.iter().map(|a| sel(a).clone()).collect::<Vec<_>>());
    Ok(RunTrace {
        algorithm: alg,
        schedule: Some(params),
        metric_rounds: 1,
        records,
        x: rows(|a| &a.x),
        lambda: Some(rows(|a| &a.lambda)),
        omega: Some(rows(|a| &a.omega)),
        iterates,
        truncated: false,
    })
}
