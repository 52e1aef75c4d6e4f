//! Polynomial regression: quadratic (optionally cubic) truth, polynomial
//! Gaussian-linear assumed model.

use serde::{Deserialize, Serialize};

use super::{DataGenerator, ObservationModel};
use crate::error::{usage, Result};
use crate::inference::FeatureMap;
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyConfig {
    /// Coefficients of `1, x, x^2`.
    pub coefficients: [f64; 3],
    /// Coefficient of `x^3`, when the severe-misspecification truth is used.
    pub cubic: Option<f64>,
    pub noise_variance: f64,
    /// Degree of the assumed model; `None` picks 2 (well) or 1 (mis).
    pub model_degree: Option<usize>,
    /// Isotropic prior variance on the model coefficients.
    pub prior_variance: f64,
}

impl Default for PolyConfig {
    fn default() -> Self {
        Self {
            coefficients: [1.0, 2.0, -0.5],
            cubic: None,
            noise_variance: 0.1,
            model_degree: None,
            prior_variance: 1.0,
        }
    }
}

impl PolyConfig {
    pub const DEFAULT_CUBIC: f64 = 0.2;

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0) {
            return usage("polynomial noise variance must be positive");
        }
        if !(self.prior_variance > 0.0) {
            return usage("polynomial prior variance must be positive");
        }
        if self.model_degree == Some(0) {
            return usage("polynomial model degree must be >= 1");
        }
        Ok(())
    }
}

pub fn poly_dgp_mean(x: f64, cfg: &PolyConfig) -> f64 {
    let [c0, c1, c2] = cfg.coefficients;
    let base = c0 + c1 * x + c2 * x * x;
    match cfg.cubic {
        Some(c3) => base + c3 * x * x * x,
        None => base,
    }
}

#[derive(Debug, Clone)]
pub struct PolyGenerator {
    cfg: PolyConfig,
}

impl PolyGenerator {
    pub fn new(cfg: PolyConfig) -> Self {
        Self { cfg }
    }
}

impl DataGenerator for PolyGenerator {
    fn mean(&self, design: &[f64]) -> f64 {
        poly_dgp_mean(design[0], &self.cfg)
    }

    fn sample(&self, design: &[f64], rng: &mut RngStream) -> f64 {
        rng.normal(self.mean(design), self.cfg.noise_variance.sqrt())
    }

    fn noise_variance(&self, _design: &[f64]) -> f64 {
        self.cfg.noise_variance
    }
}

/// `y ~ N(phi(x) . beta, noise_variance)` with `beta ~ N(0, prior_variance I)`.
#[derive(Debug, Clone)]
pub struct PolyModel {
    features: FeatureMap,
    noise_variance: f64,
    prior_variance: f64,
}

impl PolyModel {
    pub fn new(degree: usize, noise_variance: f64, prior_variance: f64) -> Self {
        Self {
            features: FeatureMap::Polynomial { degree },
            noise_variance,
            prior_variance,
        }
    }

    pub fn features(&self) -> FeatureMap {
        self.features.clone()
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_variance
    }
}

impl ObservationModel for PolyModel {
    fn param_dim(&self) -> usize {
        self.features.dim()
    }

    fn predict(&self, theta: &[f64], design: &[f64]) -> f64 {
        self.features.dot(theta, design)
    }

    fn noise_variance(&self, _mean: f64, _design: &[f64]) -> f64 {
        self.noise_variance
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        let sd = self.prior_variance.sqrt();
        (0..self.param_dim()).map(|_| rng.normal(0.0, sd)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dgp_mean_examples() {
        let cfg = PolyConfig::default();
        assert_eq!(poly_dgp_mean(0.0, &cfg), 1.0);
        assert_eq!(poly_dgp_mean(2.0, &cfg), 3.0);
        assert_eq!(poly_dgp_mean(-4.0, &cfg), -15.0);
        let cubic = PolyConfig {
            cubic: Some(PolyConfig::DEFAULT_CUBIC),
            ..cfg
        };
        assert!((poly_dgp_mean(2.0, &cubic) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let bad = PolyConfig {
            noise_variance: 0.0,
            ..PolyConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn model_predicts_linear_in_features() {
        let m = PolyModel::new(2, 0.1, 1.0);
        assert_eq!(m.param_dim(), 3);
        assert_eq!(m.predict(&[1.0, 2.0, -0.5], &[2.0]), 3.0);
    }
}
