//! Chebyshev-accelerated gossip and the mixing metric used by the outer loop.

use crate::blockspace::{mix_unchecked, BlockVector};
use crate::error::{Error, Result};
use crate::topology::{spectrum, MixingMatrix, SpectralSummary, TOL_SPECTRAL};

/// `T_j(x)` by the three-term recurrence.
pub fn chebyshev_t(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if j == 0 {
        return prev;
    }
    for _ in 1..j {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Constants of the accelerated gossip recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevPlan {
    pub j_w: usize,
    pub c2: f64,
    pub c3: f64,
    /// `a_0..=a_J`, equal to `T_j(c2)`.
    pub a: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Acceleration {
    /// `kappa_W = 1`: no acceleration possible, mix with `W` directly.
    Disabled,
    Chebyshev(ChebyshevPlan),
}

pub fn plan(spec: &SpectralSummary) -> Acceleration {
    let kappa = spec.kappa;
    if kappa - 1.0 <= TOL_SPECTRAL {
        return Acceleration::Disabled;
    }
    let j_w = (kappa.sqrt().floor() as usize).max(1);
    let c2 = (kappa + 1.0) / (kappa - 1.0);
    let c3 = 2.0 / ((kappa + 1.0) * spec.lambda_min_plus);
    let mut a = vec![1.0, c2];
    for j in 1..j_w {
        a.push(2.0 * c2 * a[j] - a[j - 1]);
    }
    a.truncate(j_w + 1);
    Acceleration::Chebyshev(ChebyshevPlan { j_w, c2, c3, a })
}

impl ChebyshevPlan {
    pub fn a_j(&self) -> f64 {
        self.a[self.j_w]
    }

    /// `1 - T_J(c2 (1 - c3 lambda)) / T_J(c2)`
    pub fn q_tilde(&self, lambda: f64) -> f64 {
        1.0 - chebyshev_t(self.j_w, self.c2 * (1.0 - self.c3 * lambda)) / self.a_j()
    }
}

/// Applies `Q~(W)` to `x` using exactly `j_w` mixing rounds.
pub fn accelerated_gossip(w: &MixingMatrix, plan: &ChebyshevPlan, x: &BlockVector) -> Result<BlockVector> {
    if x.n() != w.n() {
        return Err(Error::shape(format!("{} agents", w.n()), format!("{} agents", x.n())));
    }
    Ok(gossip_unchecked(w, plan, x))
}

fn gossip_unchecked(w: &MixingMatrix, plan: &ChebyshevPlan, x0: &BlockVector) -> BlockVector {
    let (c2, c3) = (plan.c2, plan.c3);
    let wx = mix_unchecked(w.entries(), x0);
    let mut prev = x0.clone();
    let mut cur = BlockVector::from_array((x0.data() - &(wx.data() * c3)) * c2);
    for _ in 1..plan.j_w {
        let wx = mix_unchecked(w.entries(), &cur);
        let next = BlockVector::from_array((cur.data() - &(wx.data() * c3)) * (2.0 * c2) - prev.data());
        prev = cur;
        cur = next;
    }
    BlockVector::from_array(x0.data() - &(cur.data() / plan.a_j()))
}

/// Spectrum of `Q~(W)` obtained by mapping the eigenvalues of `W`.
pub fn effective_spectrum(w: &MixingMatrix, acc: &Acceleration) -> Result<SpectralSummary> {
    let base = spectrum(w)?;
    map_spectrum(&base, acc)
}

pub fn map_spectrum(base: &SpectralSummary, acc: &Acceleration) -> Result<SpectralSummary> {
    let plan = match acc {
        Acceleration::Disabled => return Ok(base.clone()),
        Acceleration::Chebyshev(p) => p,
    };
    let threshold = TOL_SPECTRAL * base.lambda_max.abs();
    let mut mapped = Vec::with_capacity(base.eigenvalues.len());
    for &lambda in &base.eigenvalues {
        let value = plan.q_tilde(lambda);
        if lambda > threshold && value < -TOL_SPECTRAL {
            return Err(Error::NegativeEffectiveEigenvalue { lambda, value });
        }
        mapped.push(value);
    }
    SpectralSummary::from_eigenvalues(mapped)
}

/// The operator `M` of the augmented Lagrangian: either `W` or `Q~(W)`.
#[derive(Debug, Clone)]
pub struct Metric {
    w: MixingMatrix,
    plan: Option<ChebyshevPlan>,
    base: SpectralSummary,
    spectrum: SpectralSummary,
}

impl Metric {
    pub fn plain(w: MixingMatrix) -> Result<Self> {
        let base = spectrum(&w)?;
        Ok(Metric {
            w,
            plan: None,
            spectrum: base.clone(),
            base,
        })
    }

    /// `Q~(W)`, falling back to `W` when acceleration is disabled.
    pub fn chebyshev(w: MixingMatrix) -> Result<Self> {
        let base = spectrum(&w)?;
        let acc = plan(&base);
        let spectrum = map_spectrum(&base, &acc)?;
        let plan = match acc {
            Acceleration::Disabled => None,
            Acceleration::Chebyshev(p) => Some(p),
        };
        Ok(Metric {
            w,
            plan,
            base,
            spectrum,
        })
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.w
    }

    pub fn plan(&self) -> Option<&ChebyshevPlan> {
        self.plan.as_ref()
    }

    pub fn is_accelerated(&self) -> bool {
        self.plan.is_some()
    }

    /// Spectrum of the underlying `W`.
    pub fn base_spectrum(&self) -> &SpectralSummary {
        &self.base
    }

    /// Spectrum of `M` itself.
    pub fn spectrum(&self) -> &SpectralSummary {
        &self.spectrum
    }

    /// Communication rounds per application of `M`.
    pub fn rounds(&self) -> usize {
        self.plan.as_ref().map_or(1, |p| p.j_w)
    }

    pub fn apply(&self, x: &BlockVector) -> Result<BlockVector> {
        if x.n() != self.w.n() {
            return Err(Error::shape(format!("{} agents", self.w.n()), format!("{} agents", x.n())));
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &BlockVector) -> BlockVector {
        match &self.plan {
            None => mix_unchecked(self.w.entries(), x),
            Some(p) => gossip_unchecked(&self.w, p, x),
        }
    }
}
