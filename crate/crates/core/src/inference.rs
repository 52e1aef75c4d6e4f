//! Posterior over model parameters given the design history, and the
//! posterior-predictive mean used as the learned predictor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{usage, BoedError, Result};
use crate::numerics::{cholesky, log_sum_exp, solve_spd, RngStream};
use crate::testbeds::{ObservationModel, Testbed};

/// Linear feature map `phi: design -> R^p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMap {
    /// `[1, x, ..., x^degree]` of the first design coordinate.
    Polynomial { degree: usize },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Polynomial { degree } => degree + 1,
        }
    }

    pub fn eval(&self, design: &[f64]) -> DVector<f64> {
        match self {
            FeatureMap::Polynomial { degree } => {
                let x = design[0];
                let mut v = DVector::zeros(degree + 1);
                let mut p = 1.0;
                for i in 0..=*degree {
                    v[i] = p;
                    p *= x;
                }
                v
            }
        }
    }

    pub fn dot(&self, coefficients: &[f64], design: &[f64]) -> f64 {
        match self {
            FeatureMap::Polynomial { .. } => {
                let x = design[0];
                // Horner
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
        }
    }
}

/// Gaussian posterior of a linear-Gaussian model with known noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateState {
    features: FeatureMap,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    noise_var: f64,
}

impl ConjugateState {
    /// Validates that `cov` is symmetric positive semi-definite.
    pub fn new(
        features: FeatureMap,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        noise_var: f64,
    ) -> Result<Self> {
        let p = features.dim();
        if mean.len() != p || cov.nrows() != p || cov.ncols() != p {
            return usage(format!("conjugate state expects {p} parameters"));
        }
        if !(noise_var > 0.0) {
            return usage("noise variance must be positive");
        }
        let scale = cov.abs().max().max(1.0);
        if (&cov - cov.transpose()).abs().max() > 1e-9 * scale {
            return Err(BoedError::Numerical(
                "posterior covariance is not symmetric".into(),
            ));
        }
        let min_eig = cov.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * scale {
            return Err(BoedError::Numerical(format!(
                "posterior covariance has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self {
            features,
            mean,
            cov,
            noise_var,
        })
    }

    /// Prior `N(0, prior_var I)`.
    pub fn isotropic(features: FeatureMap, prior_var: f64, noise_var: f64) -> Result<Self> {
        if !(prior_var > 0.0) {
            return usage("prior variance must be positive");
        }
        let p = features.dim();
        Self::new(
            features,
            DVector::zeros(p),
            DMatrix::identity(p, p) * prior_var,
            noise_var,
        )
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn update(&self, design: &[f64], response: f64) -> Result<Self> {
        self.update_batch(&[(design.to_vec(), response)])
    }

    /// Condition on a batch of observations in precision form.
    pub fn update_batch(&self, data: &[(Vec<f64>, f64)]) -> Result<Self> {
        if data.is_empty() {
            return Ok(self.clone());
        }
        let p = self.features.dim();
        let prior_chol = cholesky(&self.cov)?;
        let prior_precision = prior_chol.inverse();
        let mut precision = prior_precision.clone();
        let mut rhs = &prior_precision * &self.mean;
        for (design, y) in data {
            let phi = self.features.eval(design);
            precision += &phi * phi.transpose() / self.noise_var;
            rhs += &phi * (*y / self.noise_var);
        }
        let precision = symmetrize(precision);
        let mean = solve_spd(&precision, &rhs)?;
        let cov = symmetrize(cholesky(&precision)?.inverse());
        debug_assert_eq!(mean.len(), p);
        Ok(Self {
            features: self.features.clone(),
            mean,
            cov,
            noise_var: self.noise_var,
        })
    }

    pub fn predictive_mean(&self, design: &[f64]) -> f64 {
        self.features.dot(self.mean.as_slice(), design)
    }

    /// Posterior variance of `phi(design) . theta` (excluding noise).
    pub fn predictive_variance(&self, design: &[f64]) -> f64 {
        let phi = self.features.eval(design);
        (phi.transpose() * &self.cov * &phi)[(0, 0)]
    }

    /// `n` draws from the posterior.
    pub fn sample_thetas(&self, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
        let root = self.covariance_root();
        let p = self.features.dim();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(p, |_, _| rng.standard_normal());
                (&self.mean + &root * z).as_slice().to_vec()
            })
            .collect()
    }

    /// A matrix `L` with `L L^T = cov`; falls back to an eigen square root for
    /// singular covariances.
    fn covariance_root(&self) -> DMatrix<f64> {
        match self.cov.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let eig = self.cov.clone().symmetric_eigen();
                let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
            }
        }
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Weighted particle approximation of the posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    particles: Vec<Vec<f64>>,
    /// Normalised so that `log_sum_exp(log_weights) == 0`.
    log_weights: Vec<f64>,
    resamples: usize,
}

impl ParticleState {
    pub fn from_particles(particles: Vec<Vec<f64>>) -> Result<Self> {
        if particles.is_empty() {
            return usage("particle set must be non-empty");
        }
        let lw = -(particles.len() as f64).ln();
        let n = particles.len();
        Ok(Self {
            particles,
            log_weights: vec![lw; n],
            resamples: 0,
        })
    }

    pub fn from_prior(
        model: &dyn ObservationModel,
        count: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        Self::from_particles((0..count).map(|_| model.sample_prior(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Vec<f64>] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Number of resampling events so far.
    pub fn resamples(&self) -> usize {
        self.resamples
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights().iter().map(|w| w * w).sum::<f64>()
    }

    /// Reweight by the likelihood of `(design, response)`; resample
    /// systematically when the ESS drops below half the particle count.
    pub fn update(
        &self,
        model: &dyn ObservationModel,
        design: &[f64],
        response: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut lw: Vec<f64> = self
            .particles
            .iter()
            .zip(&self.log_weights)
            .map(|(theta, w)| {
                let ll = model.log_likelihood(theta, design, response);
                if ll.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    w + ll
                }
            })
            .collect();
        let norm = log_sum_exp(&lw);
        if !norm.is_finite() {
            return Err(BoedError::DegeneratePosterior(format!(
                "all {} particles have zero likelihood for response {response} at design {design:?}",
                self.particles.len()
            )));
        }
        lw.iter_mut().for_each(|w| *w -= norm);
        let next = Self {
            particles: self.particles.clone(),
            log_weights: lw,
            resamples: self.resamples,
        };
        if next.ess() < next.len() as f64 / 2.0 {
            Ok(next.resample_systematic(rng))
        } else {
            Ok(next)
        }
    }

    pub fn resample_systematic(&self, rng: &mut RngStream) -> Self {
        let n = self.particles.len();
        let weights = self.weights();
        let offset = rng.uniform();
        let mut out = Vec::with_capacity(n);
        let mut cumulative = weights[0];
        let mut j = 0;
        for i in 0..n {
            let u = (i as f64 + offset) / n as f64;
            while u > cumulative && j + 1 < n {
                j += 1;
                cumulative += weights[j];
            }
            out.push(self.particles[j].clone());
        }
        let lw = -(n as f64).ln();
        Self {
            particles: out,
            log_weights: vec![lw; n],
            resamples: self.resamples + 1,
        }
    }

    pub fn predictive_mean(&self, model: &dyn ObservationModel, design: &[f64]) -> f64 {
        self.particles
            .iter()
            .zip(&self.log_weights)
            .map(|(theta, lw)| {
                let w = lw.exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * model.predict(theta, design)
                }
            })
            .sum()
    }

    pub fn mean_theta(&self) -> Vec<f64> {
        let p = self.particles[0].len();
        let mut out = vec![0.0; p];
        for (theta, lw) in self.particles.iter().zip(&self.log_weights) {
            let w = lw.exp();
            out.iter_mut().zip(theta).for_each(|(o, t)| *o += w * t);
        }
        out
    }

    /// `n` i.i.d. draws (multinomial on the weights).
    pub fn sample_thetas(&self, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
        let mut cumulative = Vec::with_capacity(self.particles.len());
        let mut acc = 0.0;
        for lw in &self.log_weights {
            acc += lw.exp();
            cumulative.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.uniform() * acc;
                let idx = cumulative
                    .partition_point(|c| *c <= u)
                    .min(self.particles.len() - 1);
                self.particles[idx].clone()
            })
            .collect()
    }
}

/// Serializable posterior summary for run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub kind: String,
    pub mean: Vec<f64>,
    pub ess: Option<f64>,
}

/// Either posterior representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Conjugate(ConjugateState),
    Particles(ParticleState),
}

impl Posterior {
    /// The conjugate prior when the testbed offers one, otherwise `particles`
    /// prior draws.
    pub fn prior_for(testbed: &Testbed, particles: usize, rng: &mut RngStream) -> Result<Self> {
        match testbed.conjugate_prior() {
            Some(prior) => Ok(Posterior::Conjugate(prior.clone())),
            None => Ok(Posterior::Particles(ParticleState::from_prior(
                testbed.model(),
                particles,
                rng,
            )?)),
        }
    }

    pub fn update(
        &self,
        model: &dyn ObservationModel,
        design: &[f64],
        response: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        match self {
            Posterior::Conjugate(s) => Ok(Posterior::Conjugate(s.update(design, response)?)),
            Posterior::Particles(s) => Ok(Posterior::Particles(
                s.update(model, design, response, rng)?,
            )),
        }
    }

    /// The learned predictor `f_hat(design)`: posterior-predictive mean.
    pub fn predictive_mean(&self, model: &dyn ObservationModel, design: &[f64]) -> f64 {
        match self {
            Posterior::Conjugate(s) => s.predictive_mean(design),
            Posterior::Particles(s) => s.predictive_mean(model, design),
        }
    }

    pub fn sample_thetas(&self, n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
        match self {
            Posterior::Conjugate(s) => s.sample_thetas(n, rng),
            Posterior::Particles(s) => s.sample_thetas(n, rng),
        }
    }

    pub fn summary(&self) -> PosteriorSummary {
        match self {
            Posterior::Conjugate(s) => PosteriorSummary {
                kind: "conjugate".into(),
                mean: s.mean().as_slice().to_vec(),
                ess: None,
            },
            Posterior::Particles(s) => PosteriorSummary {
                kind: "particles".into(),
                mean: s.mean_theta(),
                ess: Some(s.ess()),
            },
        }
    }
}
