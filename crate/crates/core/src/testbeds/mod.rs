//! Experiment environments: a data-generating process paired with the model
//! the learner assumes.
//!
//! Everything downstream works in *response space*: the scale on which the
//! assumed model's observation law is Gaussian. For the polynomial and PK
//! testbeds that is the raw observation; for the source testbed it is
//! `log y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{usage, BoedError, Result};
use crate::inference::ConjugateState;
use crate::numerics::{RngStream, SampleSet};

pub mod pk;
pub mod poly;
pub mod source;

pub use pk::{
    pk_concentration, pk_dual_absorption, pk_observe, AbsorptionSign, PkConfig, PkVariant,
};
pub use poly::{poly_dgp_mean, PolyConfig};
pub use source::{acoustic_intensity, source_observe, SourceConfig, SourceConstants};

/// Axis-aligned box of admissible designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DesignDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return usage("domain bounds must be non-empty and of equal length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return usage("domain lower bounds must be strictly below upper bounds");
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Self {
        Self::new(vec![lower], vec![upper]).expect("valid interval")
    }

    pub fn cube(lower: f64, upper: f64, dim: usize) -> Self {
        Self::new(vec![lower; dim], vec![upper; dim]).expect("valid cube")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    /// Regular grid with `per_dim` points per axis, endpoints included,
    /// enumerated with the first axis varying slowest.
    pub fn grid(&self, per_dim: usize) -> Result<Vec<Vec<f64>>> {
        if per_dim < 2 {
            return usage("grid needs at least 2 points per dimension");
        }
        let axes: Vec<Vec<f64>> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                (0..per_dim)
                    .map(|i| {
                        if i + 1 == per_dim {
                            u
                        } else {
                            l + (u - l) * i as f64 / (per_dim - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        Ok(points)
    }

    pub fn sample_uniform(&self, rng: &mut RngStream) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.uniform())
            .collect()
    }

    pub fn sample_set(&self, count: usize, rng: &mut RngStream) -> Result<SampleSet> {
        SampleSet::new((0..count).map(|_| self.sample_uniform(rng)).collect())
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }
}

/// Gaussian law of a response given parameters and a design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsGaussian {
    pub mean: f64,
    pub var: f64,
}

impl ObsGaussian {
    pub fn log_density(&self, response: f64) -> f64 {
        let r = response - self.mean;
        -0.5 * (r * r / self.var + self.var.ln() + std::f64::consts::TAU.ln())
    }
}

/// The learner's assumed model: prior over parameters plus a Gaussian
/// response law.
pub trait ObservationModel: Send + Sync {
    fn param_dim(&self) -> usize;

    /// Predicted response mean `f(theta, design)`.
    fn predict(&self, theta: &[f64], design: &[f64]) -> f64;

    /// Response variance when the predicted mean is `mean`.
    fn noise_variance(&self, mean: f64, design: &[f64]) -> f64;

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64>;

    fn obs_distribution(&self, theta: &[f64], design: &[f64]) -> ObsGaussian {
        let mean = self.predict(theta, design);
        ObsGaussian {
            mean,
            var: self.noise_variance(mean, design),
        }
    }

    fn log_likelihood(&self, theta: &[f64], design: &[f64], response: f64) -> f64 {
        let d = self.obs_distribution(theta, design);
        if !(d.mean.is_finite() && d.var.is_finite() && d.var > 0.0) {
            return f64::NEG_INFINITY;
        }
        d.log_density(response)
    }

    fn sample_response(&self, theta: &[f64], design: &[f64], rng: &mut RngStream) -> f64 {
        let d = self.obs_distribution(theta, design);
        rng.normal(d.mean, d.var.sqrt())
    }
}

/// The true data-generating process, in response space.
pub trait DataGenerator: Send + Sync {
    /// `f*(design)`.
    fn mean(&self, design: &[f64]) -> f64;

    /// One fresh response draw at `design`.
    fn sample(&self, design: &[f64], rng: &mut RngStream) -> f64;

    /// Response noise variance at `design`, when known in closed form.
    fn noise_variance(&self, design: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestbedKind {
    Poly,
    Source,
    Pk,
}

impl fmt::Display for TestbedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestbedKind::Poly => "poly",
            TestbedKind::Source => "source",
            TestbedKind::Pk => "pk",
        })
    }
}

impl FromStr for TestbedKind {
    type Err = BoedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "poly" => Ok(Self::Poly),
            "source" => Ok(Self::Source),
            "pk" => Ok(Self::Pk),
            other => Err(BoedError::Config(format!(
                "unknown testbed '{other}' (poly|source|pk)"
            ))),
        }
    }
}

/// Whether the assumed model class contains the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specification {
    Well,
    Mis,
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Specification::Well => "well",
            Specification::Mis => "mis",
        })
    }
}

impl FromStr for Specification {
    type Err = BoedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "well" => Ok(Self::Well),
            "mis" => Ok(Self::Mis),
            other => Err(BoedError::Config(format!(
                "unknown specification '{other}' (well|mis)"
            ))),
        }
    }
}

/// Resolved testbed parameters. `instantiate` turns this into a [`Testbed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestbedConfig {
    pub kind: TestbedKind,
    pub spec: Specification,
    pub poly: PolyConfig,
    pub source: SourceConfig,
    pub pk: PkConfig,
}

impl TestbedConfig {
    pub fn new(kind: TestbedKind, spec: Specification) -> Self {
        Self {
            kind,
            spec,
            poly: PolyConfig::default(),
            source: SourceConfig::default(),
            pk: PkConfig::default(),
        }
    }

    pub fn domain(&self) -> DesignDomain {
        match self.kind {
            TestbedKind::Poly => DesignDomain::interval(-4.0, 4.0),
            TestbedKind::Source => DesignDomain::cube(-4.0, 4.0, self.source.dim),
            TestbedKind::Pk => DesignDomain::interval(0.0, 24.0),
        }
    }

    /// Build the testbed. `truth_rng` is consumed only by testbeds whose true
    /// parameters are random (the source testbed draws source locations from
    /// the prior).
    pub fn instantiate(&self, truth_rng: &mut RngStream) -> Result<Testbed> {
        let domain = self.domain();
        match self.kind {
            TestbedKind::Poly => {
                self.poly.validate()?;
                let degree = match self.spec {
                    Specification::Well => 2,
                    Specification::Mis => 1,
                };
                let degree = self.poly.model_degree.unwrap_or(degree);
                let model = poly::PolyModel::new(
                    degree,
                    self.poly.noise_variance,
                    self.poly.prior_variance,
                );
                let prior = ConjugateState::isotropic(
                    model.features(),
                    self.poly.prior_variance,
                    self.poly.noise_variance,
                )?;
                Ok(Testbed {
                    config: self.clone(),
                    domain,
                    generator: Box::new(poly::PolyGenerator::new(self.poly.clone())),
                    model: Box::new(model),
                    conjugate_prior: Some(prior),
                })
            }
            TestbedKind::Source => {
                self.source.validate()?;
                let dgp_constants = match self.spec {
                    Specification::Well => self.source.model.clone(),
                    Specification::Mis => self.source.dgp_misspecified.clone(),
                };
                let model = source::SourceModel::new(self.source.clone());
                let theta_true = model.sample_prior(truth_rng);
                Ok(Testbed {
                    config: self.clone(),
                    domain,
                    generator: Box::new(source::SourceGenerator::new(
                        dgp_constants,
                        self.source.dim,
                        theta_true,
                    )),
                    model: Box::new(model),
                    conjugate_prior: None,
                })
            }
            TestbedKind::Pk => {
                self.pk.validate()?;
                let variant = match self.spec {
                    Specification::Well => PkVariant::Well,
                    Specification::Mis => PkVariant::Mis,
                };
                Ok(Testbed {
                    config: self.clone(),
                    domain,
                    generator: Box::new(pk::PkGenerator::new(self.pk.clone())),
                    model: Box::new(pk::PkModel::new(self.pk.clone(), variant)),
                    conjugate_prior: None,
                })
            }
        }
    }
}

/// A DGP, an assumed model and the design domain they share.
pub struct Testbed {
    config: TestbedConfig,
    domain: DesignDomain,
    generator: Box<dyn DataGenerator>,
    model: Box<dyn ObservationModel>,
    conjugate_prior: Option<ConjugateState>,
}

impl fmt::Debug for Testbed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Testbed")
            .field("kind", &self.config.kind)
            .field("spec", &self.config.spec)
            .field("domain", &self.domain)
            .field("conjugate", &self.conjugate_prior.is_some())
            .finish()
    }
}

impl Testbed {
    pub fn config(&self) -> &TestbedConfig {
        &self.config
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.config.kind, self.config.spec)
    }

    pub fn domain(&self) -> &DesignDomain {
        &self.domain
    }

    pub fn generator(&self) -> &dyn DataGenerator {
        self.generator.as_ref()
    }

    pub fn model(&self) -> &dyn ObservationModel {
        self.model.as_ref()
    }

    /// Conjugate prior when the assumed model is Gaussian-linear in its
    /// parameters.
    pub fn conjugate_prior(&self) -> Option<&ConjugateState> {
        self.conjugate_prior.as_ref()
    }

    pub fn dgp_mean(&self, design: &[f64]) -> f64 {
        self.generator.mean(design)
    }

    pub fn dgp_sample(&self, design: &[f64], rng: &mut RngStream) -> f64 {
        self.generator.sample(design, rng)
    }

    /// Candidate designs: a regular grid over the design domain.
    pub fn candidates(&self, per_dim: usize) -> Result<Vec<Vec<f64>>> {
        self.domain.grid(per_dim)
    }

    /// `count` i.i.d. draws from the test distribution (uniform on the domain).
    pub fn test_sample(&self, count: usize, rng: &mut RngStream) -> Result<SampleSet> {
        self.domain.sample_set(count, rng)
    }
}
