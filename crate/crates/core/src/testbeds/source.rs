//! Acoustic source localisation: `K` sources emit signals whose intensities
//! superpose; observations are log-normal around the total intensity.
//!
//! Parameters are the flattened source locations `[theta_1, ..., theta_K]`,
//! each of dimension `dim`. Response space is `log y`.

use serde::{Deserialize, Serialize};

use super::{DataGenerator, ObservationModel};
use crate::error::{usage, Result};
use crate::numerics::RngStream;

/// Signal constants of the intensity law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConstants {
    /// Base signal `b`.
    pub base: f64,
    /// Max-signal constant `m`.
    pub max_signal: f64,
    /// Per-source amplitudes `alpha_k`.
    pub amplitudes: Vec<f64>,
    /// Standard deviation of `log y`.
    pub sigma: f64,
}

impl SourceConstants {
    pub fn well_specified() -> Self {
        Self {
            base: 0.1,
            max_signal: 1e-4,
            amplitudes: vec![1.0, 1.0],
            sigma: 0.1,
        }
    }

    pub fn misspecified_dgp() -> Self {
        Self {
            base: 0.4,
            max_signal: 4e-4,
            amplitudes: vec![0.4, 0.4],
            sigma: 0.1,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if self.amplitudes.len() != k {
            return usage(format!(
                "expected {k} amplitudes, got {}",
                self.amplitudes.len()
            ));
        }
        let positive = self.base > 0.0
            && self.max_signal > 0.0
            && self.sigma > 0.0
            && self.amplitudes.iter().all(|a| *a > 0.0);
        if !positive {
            return usage("source constants b, m, alpha_k and sigma must all be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub sources: usize,
    pub dim: usize,
    /// Constants of the assumed model (and of the DGP when well specified).
    pub model: SourceConstants,
    /// DGP constants in the misspecified case.
    pub dgp_misspecified: SourceConstants,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            sources: 2,
            dim: 1,
            model: SourceConstants::well_specified(),
            dgp_misspecified: SourceConstants::misspecified_dgp(),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 || self.dim == 0 {
            return usage("source testbed needs K >= 1 and dim >= 1");
        }
        self.model.validate(self.sources)?;
        self.dgp_misspecified.validate(self.sources)
    }
}

/// Total intensity `b + sum_k alpha_k / (m + |theta_k - design|^2)`.
///
/// `theta` holds the `K` source locations back to back, each of the design's
/// dimension.
pub fn acoustic_intensity(theta: &[f64], design: &[f64], constants: &SourceConstants) -> f64 {
    let d = design.len();
    constants.base
        + theta
            .chunks_exact(d)
            .zip(&constants.amplitudes)
            .map(|(loc, alpha)| {
                let dist2: f64 = loc.iter().zip(design).map(|(a, b)| (a - b) * (a - b)).sum();
                alpha / (constants.max_signal + dist2)
            })
            .sum::<f64>()
}

/// One positive observation: `exp(N(log mu, sigma))`.
pub fn source_observe(
    theta: &[f64],
    design: &[f64],
    constants: &SourceConstants,
    rng: &mut RngStream,
) -> f64 {
    let mu = acoustic_intensity(theta, design, constants);
    rng.normal(mu.ln(), constants.sigma).exp()
}

#[derive(Debug, Clone)]
pub struct SourceGenerator {
    constants: SourceConstants,
    dim: usize,
    theta_true: Vec<f64>,
}

impl SourceGenerator {
    pub fn new(constants: SourceConstants, dim: usize, theta_true: Vec<f64>) -> Self {
        Self {
            constants,
            dim,
            theta_true,
        }
    }

    pub fn theta_true(&self) -> &[f64] {
        &self.theta_true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl DataGenerator for SourceGenerator {
    fn mean(&self, design: &[f64]) -> f64 {
        acoustic_intensity(&self.theta_true, design, &self.constants).ln()
    }

    fn sample(&self, design: &[f64], rng: &mut RngStream) -> f64 {
        source_observe(&self.theta_true, design, &self.constants, rng).ln()
    }

    fn noise_variance(&self, _design: &[f64]) -> f64 {
        self.constants.sigma * self.constants.sigma
    }
}

/// Assumed model: the well-specified constants with a standard normal prior
/// on every source coordinate.
#[derive(Debug, Clone)]
pub struct SourceModel {
    cfg: SourceConfig,
}

impl SourceModel {
    pub fn new(cfg: SourceConfig) -> Self {
        Self { cfg }
    }
}

impl ObservationModel for SourceModel {
    fn param_dim(&self) -> usize {
        self.cfg.sources * self.cfg.dim
    }

    fn predict(&self, theta: &[f64], design: &[f64]) -> f64 {
        acoustic_intensity(theta, design, &self.cfg.model).ln()
    }

    fn noise_variance(&self, _mean: f64, _design: &[f64]) -> f64 {
        self.cfg.model.sigma * self.cfg.model.sigma
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        (0..self.param_dim())
            .map(|_| rng.standard_normal())
            .collect()
    }
}
