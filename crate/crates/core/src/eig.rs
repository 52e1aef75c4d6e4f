//! Expected information gain of a design under the current posterior.
//!
//! The Monte Carlo estimator is nested: `N` outer joint draws `(theta_n, y_n)`
//! and a shared set of `M` inner posterior draws for the marginal likelihood.
//! The outer `theta_n` is added to its own inner set, which keeps the
//! log-marginal finite for any `M`.

use serde::{Deserialize, Serialize};

use crate::error::{usage, BoedError, Result};
use crate::inference::{ConjugateState, Posterior};
use crate::numerics::RngStream;
use crate::testbeds::ObservationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigConfig {
    pub outer: usize,
    pub inner: usize,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            outer: 500,
            inner: 500,
        }
    }
}

impl EigConfig {
    /// Sample sizes used when an estimate is checked against a closed form.
    pub const ORACLE: EigConfig = EigConfig {
        outer: 2000,
        inner: 2000,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigEstimate {
    /// Estimate in nats.
    pub value: f64,
    /// Monte Carlo standard error over the outer samples.
    pub std_error: f64,
    pub outer: usize,
    pub inner: usize,
}

/// Posterior draws and standard-normal noise shared by every design scored
/// in one acquisition step.
#[derive(Debug, Clone)]
pub struct NmcDraws {
    outer: Vec<Vec<f64>>,
    noise: Vec<f64>,
    inner: Vec<Vec<f64>>,
}

impl NmcDraws {
    pub fn draw(posterior: &Posterior, cfg: EigConfig, rng: &mut RngStream) -> Result<Self> {
        if cfg.outer == 0 || cfg.inner == 0 {
            return usage("EIG needs at least one outer and one inner sample");
        }
        let outer = posterior.sample_thetas(cfg.outer, rng);
        let noise = (0..cfg.outer).map(|_| rng.standard_normal()).collect();
        let inner = posterior.sample_thetas(cfg.inner, rng);
        Ok(Self {
            outer,
            noise,
            inner,
        })
    }

    pub fn config(&self) -> EigConfig {
        EigConfig {
            outer: self.outer.len(),
            inner: self.inner.len(),
        }
    }
}

struct InnerTerm {
    mean: f64,
    log_norm: f64,
    half_precision: f64,
}

impl InnerTerm {
    #[inline]
    fn log_density(&self, y: f64) -> f64 {
        let r = y - self.mean;
        self.log_norm - self.half_precision * r * r
    }
}

fn inner_term(model: &dyn ObservationModel, theta: &[f64], design: &[f64]) -> InnerTerm {
    let d = model.obs_distribution(theta, design);
    if !(d.mean.is_finite() && d.var > 0.0 && d.var.is_finite()) {
        return InnerTerm {
            mean: 0.0,
            log_norm: f64::NEG_INFINITY,
            half_precision: 0.0,
        };
    }
    InnerTerm {
        mean: d.mean,
        log_norm: -0.5 * (d.var.ln() + std::f64::consts::TAU.ln()),
        half_precision: 0.5 / d.var,
    }
}

/// Nested Monte Carlo EIG at `design` using pre-drawn samples.
pub fn eig_nmc_with(
    draws: &NmcDraws,
    model: &dyn ObservationModel,
    design: &[f64],
) -> Result<EigEstimate> {
    let inner: Vec<InnerTerm> = draws
        .inner
        .iter()
        .map(|t| inner_term(model, t, design))
        .collect();
    let log_count = ((inner.len() + 1) as f64).ln();
    let mut buf = vec![0.0; inner.len()];
    let mut terms = Vec::with_capacity(draws.outer.len());
    for (theta, z) in draws.outer.iter().zip(&draws.noise) {
        let own = inner_term(model, theta, design);
        if !own.log_norm.is_finite() {
            return Err(BoedError::Estimation(format!(
                "outer draw {theta:?} has no finite likelihood at design {design:?}"
            )));
        }
        let y = own.mean + z / (2.0 * own.half_precision).sqrt();
        let own_ll = own.log_density(y);
        let mut max = own_ll;
        for (b, t) in buf.iter_mut().zip(&inner) {
            *b = t.log_density(y);
            if *b > max {
                max = *b;
            }
        }
        let sum = (own_ll - max).exp() + buf.iter().map(|v| (v - max).exp()).sum::<f64>();
        let log_marginal = max + sum.ln() - log_count;
        let term = own_ll - log_marginal;
        if !term.is_finite() {
            return Err(BoedError::Estimation(format!(
                "non-finite information term at design {design:?}: log p(y|theta) = {own_ll}, log p(y) = {log_marginal}"
            )));
        }
        terms.push(term);
    }
    let n = terms.len() as f64;
    let value = terms.iter().sum::<f64>() / n;
    let var = if terms.len() > 1 {
        terms.iter().map(|t| (t - value).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EigEstimate {
        value,
        std_error: (var / n).sqrt(),
        outer: terms.len(),
        inner: inner.len(),
    })
}

/// Nested Monte Carlo EIG at a single design.
pub fn eig_nmc(
    posterior: &Posterior,
    model: &dyn ObservationModel,
    design: &[f64],
    cfg: EigConfig,
    rng: &mut RngStream,
) -> Result<EigEstimate> {
    let draws = NmcDraws::draw(posterior, cfg, rng)?;
    eig_nmc_with(&draws, model, design)
}

/// Closed-form EIG of a linear-Gaussian model:
/// `0.5 * ln(1 + phi^T Sigma phi / sigma^2)`.
pub fn eig_linear_gaussian(state: &ConjugateState, design: &[f64]) -> f64 {
    0.5 * (state.predictive_variance(design) / state.noise_var()).ln_1p()
}
