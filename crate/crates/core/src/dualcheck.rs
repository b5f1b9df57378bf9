//! Dual-side oracles in the scaled domain: the prox of the primal envelope,
//! the dual envelope's gradient, and dual suboptimality.
//!
//! Scaled variables `Lambda_s = sqrt(M) Lambda` are used throughout, so only
//! `M` itself is ever applied.

use crate::blockspace::{consensus_mean, BlockVector};
use crate::error::{Error, Result};
use crate::gossip::Metric;
use crate::objectives::{GlobalObjective, LocalObjective};
use crate::solvers::{exact_solve, Subproblem};

/// Scaled dual variable with its regularization and metric.
#[derive(Debug, Clone)]
pub struct DualState {
    lambda: BlockVector,
    rho: f64,
    metric: Metric,
}

/// Column sums must vanish to this level, relative to `1 + |Lambda|`.
pub const SUBSPACE_TOL: f64 = 1e-8;

impl DualState {
    pub fn new(lambda: BlockVector, rho: f64, metric: Metric) -> Result<Self> {
        if lambda.n() != metric.mixing().n() {
            return Err(Error::shape(
                format!("{} agents", metric.mixing().n()),
                format!("{} agents", lambda.n()),
            ));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
        }
        let drift = subspace_residual(&lambda);
        if drift > SUBSPACE_TOL {
            return Err(Error::InvalidParameter(format!(
                "dual variable has nonzero column sums (relative {drift:e})"
            )));
        }
        Ok(DualState { lambda, rho, metric })
    }

    pub fn lambda(&self) -> &BlockVector {
        &self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }
}

/// Largest absolute column sum divided by `1 + |Lambda|`.
pub fn subspace_residual(lambda: &BlockVector) -> f64 {
    let worst = lambda.column_sums().iter().fold(0.0f64, |m, s| m.max(s.abs()));
    worst / (1.0 + lambda.norm())
}

/// `argmin_X F(X) + <Omega, X> + rho/2 |X|_M^2`, to `|grad| <= tol`.
pub fn prox_psi(
    omega: &BlockVector,
    rho: f64,
    f: &GlobalObjective,
    metric: &Metric,
    tol: f64,
) -> Result<BlockVector> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let p = Subproblem::new(f, omega, rho, metric)?;
    Ok(exact_solve(&p, None, tol)?.0)
}

/// `-min_X { F(X) + <Lambda_s, X> + rho/2 |X|_M^2 }`
pub fn moreau_phi_value(state: &DualState, f: &GlobalObjective, tol: f64) -> Result<f64> {
    let p = Subproblem::new(f, &state.lambda, state.rho, &state.metric)?;
    let (x, _) = exact_solve(&p, None, tol)?;
    Ok(-p.value(&x)?)
}

/// `-M prox_psi(Lambda_s)`
pub fn moreau_phi_grad(state: &DualState, f: &GlobalObjective, tol: f64) -> Result<BlockVector> {
    let x = prox_psi(&state.lambda, state.rho, f, &state.metric, tol)?;
    Ok(-&state.metric.apply(&x)?)
}

/// Dual optimum `-grad F(1 x*)`; zero column sums whenever `x*` is optimal.
pub fn dual_optimum(f: &GlobalObjective, x_star: ndarray::ArrayView1<'_, f64>) -> Result<BlockVector> {
    let g = f.grad(&BlockVector::consensus(f.n(), x_star))?;
    Ok(-&g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMethod {
    /// Closed-form conjugates.
    Conjugate,
    /// `f(mean prox_psi(Lambda)) - f(x*)`.
    Surrogate,
}

impl GapMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GapMethod::Conjugate => "conjugate",
            GapMethod::Surrogate => "surrogate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualGap {
    pub value: f64,
    pub method: GapMethod,
}

/// `F*(-Lambda_s) - F*(-Lambda*_s)` for quadratics, the surrogate otherwise.
pub fn dual_gap(
    state: &DualState,
    f: &GlobalObjective,
    x_star: Option<ndarray::ArrayView1<'_, f64>>,
    tol: f64,
) -> Result<DualGap> {
    if let Some(conj) = conjugate_sum(f, &(-&state.lambda)) {
        let value = match x_star {
            // F*(grad F(X*)) = -f(x*) since the gradients sum to zero.
            Some(xs) => conj + f.consensus_value(xs)?,
            None => {
                let xs = f.quadratic_minimizer().ok_or(Error::MissingReference)?;
                conj + f.consensus_value(xs.view())?
            }
        };
        return Ok(DualGap {
            value,
            method: GapMethod::Conjugate,
        });
    }
    let xs = x_star.ok_or(Error::MissingReference)?;
    let x = prox_psi(&state.lambda, state.rho, f, &state.metric, tol)?;
    let value = f.consensus_value(consensus_mean(&x).view())? - f.consensus_value(xs)?;
    Ok(DualGap {
        value,
        method: GapMethod::Surrogate,
    })
}

/// `sum_i f_i*(y_i)`; `None` unless every local is quadratic.
pub fn conjugate_sum(f: &GlobalObjective, y: &BlockVector) -> Option<f64> {
    let mut total = 0.0;
    for (i, l) in f.locals().iter().enumerate() {
        let LocalObjective::Quadratic(q) = l else { return None };
        total += q.conjugate(y.row(i));
    }
    Some(total)
}

/// Gap at `Lambda = 0`: `f(x*) - sum_i min f_i`.
pub fn initial_dual_gap(f: &GlobalObjective, x_star: ndarray::ArrayView1<'_, f64>, tol: f64) -> Result<f64> {
    Ok(f.consensus_value(x_star)? - f.separable_minimum(tol)?)
}
