//! One-compartment pharmacokinetics with first-order absorption, and the
//! dual-absorption alternative used as the misspecified assumed model.
//!
//! Parameters are `(k_a, k_e, V)` on the natural scale; the prior is
//! log-normal.

use serde::{Deserialize, Serialize};

use super::{DataGenerator, ObservationModel};
use crate::error::{usage, Result};
use crate::numerics::RngStream;

/// Sign joining the two exponentials of each dual-absorption pathway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsorptionSign {
    /// `e^{-k_e t} + e^{-k_a t}`, the default.
    Plus,
    /// `e^{-k_e t} - e^{-k_a t}`, the conventional Bateman form.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PkVariant {
    Well,
    Mis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkConfig {
    /// True `(k_a, k_e, V)`.
    pub theta_real: [f64; 3],
    /// Dose constant `D_V`.
    pub dose: f64,
    pub mult_var: f64,
    pub add_var: f64,
    /// Slow-pathway rate ratio `rho`.
    pub rho: f64,
    /// Fast-pathway fraction `f`.
    pub fast_fraction: f64,
    pub mis_mult_var: f64,
    pub mis_add_var: f64,
    pub prior_log_means: [f64; 3],
    pub prior_log_var: f64,
    pub absorption_sign: AbsorptionSign,
}

impl Default for PkConfig {
    fn default() -> Self {
        Self {
            theta_real: [1.5, 0.15, 15.0],
            dose: 400.0,
            mult_var: 0.01,
            add_var: 0.1,
            rho: 0.25,
            fast_fraction: 0.6,
            mis_mult_var: 0.02,
            mis_add_var: 0.2,
            prior_log_means: [1f64.ln(), 0.1f64.ln(), 20f64.ln()],
            prior_log_var: 0.05,
            absorption_sign: AbsorptionSign::Plus,
        }
    }
}

impl PkConfig {
    pub fn validate(&self) -> Result<()> {
        let [ka, ke, v] = self.theta_real;
        if !(ka > 0.0 && ke > 0.0 && v > 0.0) {
            return usage("PK rates and volume must be positive");
        }
        if ka == ke {
            return usage("PK absorption and elimination rates must differ");
        }
        if !(self.rho > 0.0 && self.rho < 1.0)
            || !(self.fast_fraction > 0.0 && self.fast_fraction <= 1.0)
        {
            return usage("PK rho must lie in (0,1) and the fast fraction in (0,1]");
        }
        if !(self.dose > 0.0
            && self.add_var > 0.0
            && self.mis_add_var > 0.0
            && self.prior_log_var > 0.0)
        {
            return usage("PK dose, additive variances and prior variance must be positive");
        }
        if self.mult_var < 0.0 || self.mis_mult_var < 0.0 {
            return usage("PK multiplicative variances must be non-negative");
        }
        Ok(())
    }

    fn noise(&self, variant: PkVariant) -> (f64, f64) {
        match variant {
            PkVariant::Well => (self.mult_var, self.add_var),
            PkVariant::Mis => (self.mis_mult_var, self.mis_add_var),
        }
    }
}

fn pathway(time: f64, ka: f64, ke: f64, sign: AbsorptionSign) -> Result<f64> {
    if ka == ke {
        return usage(format!("absorption rate {ka} equals elimination rate {ke}"));
    }
    let s = match sign {
        AbsorptionSign::Plus => 1.0,
        AbsorptionSign::Minus => -1.0,
    };
    Ok(ka / (ka - ke) * ((-ke * time).exp() + s * (-ka * time).exp()))
}

/// Concentration `D_V / V * k_a / (k_a - k_e) * (e^{-k_e t} - e^{-k_a t})`.
pub fn pk_concentration(time: f64, theta: &[f64; 3], dose: f64) -> Result<f64> {
    let [ka, ke, v] = *theta;
    Ok(dose / v * pathway(time, ka, ke, AbsorptionSign::Minus)?)
}

/// Dual-absorption concentration: fast pathway at `k_a`, slow pathway at
/// `rho * k_a`, mixed with weight `fast_fraction`.
pub fn pk_dual_absorption(
    time: f64,
    theta: &[f64; 3],
    rho: f64,
    fast_fraction: f64,
    dose: f64,
    sign: AbsorptionSign,
) -> Result<f64> {
    let [ka, ke, v] = *theta;
    let fast = pathway(time, ka, ke, sign)?;
    let slow = if fast_fraction < 1.0 {
        pathway(time, rho * ka, ke, sign)?
    } else {
        0.0
    };
    Ok(dose / v * (fast_fraction * fast + (1.0 - fast_fraction) * slow))
}

/// Heteroskedastic Gaussian observation of the variant's mean curve.
pub fn pk_observe(
    time: f64,
    theta: &[f64; 3],
    variant: PkVariant,
    cfg: &PkConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    let z = mean_curve(time, theta, variant, cfg)?;
    let (mult, add) = cfg.noise(variant);
    Ok(rng.normal(z, (mult * z * z + add).sqrt()))
}

fn mean_curve(time: f64, theta: &[f64; 3], variant: PkVariant, cfg: &PkConfig) -> Result<f64> {
    match variant {
        PkVariant::Well => pk_concentration(time, theta, cfg.dose),
        PkVariant::Mis => pk_dual_absorption(
            time,
            theta,
            cfg.rho,
            cfg.fast_fraction,
            cfg.dose,
            cfg.absorption_sign,
        ),
    }
}

fn as_theta(theta: &[f64]) -> [f64; 3] {
    [theta[0], theta[1], theta[2]]
}

/// The true process: the single-pathway law at `theta_real`.
#[derive(Debug, Clone)]
pub struct PkGenerator {
    cfg: PkConfig,
}

impl PkGenerator {
    pub fn new(cfg: PkConfig) -> Self {
        Self { cfg }
    }
}

impl DataGenerator for PkGenerator {
    fn mean(&self, design: &[f64]) -> f64 {
        pk_concentration(design[0], &self.cfg.theta_real, self.cfg.dose)
            .expect("validated theta_real")
    }

    fn sample(&self, design: &[f64], rng: &mut RngStream) -> f64 {
        pk_observe(
            design[0],
            &self.cfg.theta_real,
            PkVariant::Well,
            &self.cfg,
            rng,
        )
        .expect("validated theta_real")
    }

    fn noise_variance(&self, design: &[f64]) -> f64 {
        let z = self.mean(design);
        self.cfg.mult_var * z * z + self.cfg.add_var
    }
}

#[derive(Debug, Clone)]
pub struct PkModel {
    cfg: PkConfig,
    variant: PkVariant,
}

impl PkModel {
    pub fn new(cfg: PkConfig, variant: PkVariant) -> Self {
        Self { cfg, variant }
    }
}

impl ObservationModel for PkModel {
    fn param_dim(&self) -> usize {
        3
    }

    fn predict(&self, theta: &[f64], design: &[f64]) -> f64 {
        mean_curve(design[0], &as_theta(theta), self.variant, &self.cfg).unwrap_or(f64::NAN)
    }

    fn noise_variance(&self, mean: f64, _design: &[f64]) -> f64 {
        let (mult, add) = self.cfg.noise(self.variant);
        mult * mean * mean + add
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        let sd = self.cfg.prior_log_var.sqrt();
        self.cfg
            .prior_log_means
            .iter()
            .map(|m| rng.normal(*m, sd).exp())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REAL: [f64; 3] = [1.5, 0.15, 15.0];

    #[test]
    fn concentration_examples() {
        assert_eq!(pk_concentration(0.0, &REAL, 400.0).unwrap(), 0.0);
        // (400/15)(1.5/1.35)(e^-0.15 - e^-1.5)
        let expected = 400.0 / 15.0 * (1.5 / 1.35) * ((-0.15f64).exp() - (-1.5f64).exp());
        let z = pk_concentration(1.0, &REAL, 400.0).unwrap();
        assert_relative_eq!(z, expected, max_relative = 1e-14);
        assert!((z - 18.89).abs() < 0.01);
        assert!(pk_concentration(1e4, &REAL, 400.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn concentration_rejects_equal_rates() {
        assert!(pk_concentration(1.0, &[0.2, 0.2, 15.0], 400.0).is_err());
        assert!(pk_dual_absorption(
            1.0,
            &[0.6, 0.15, 15.0],
            0.25,
            0.6,
            400.0,
            AbsorptionSign::Plus
        )
        .is_err());
    }

    #[test]
    fn dual_absorption_examples() {
        let z0 = pk_dual_absorption(0.0, &REAL, 0.25, 0.6, 400.0, AbsorptionSign::Plus).unwrap();
        let expected = 400.0 / 15.0 * (0.6 * (1.5 / 1.35) * 2.0 + 0.4 * (0.375 / 0.225) * 2.0);
        assert_relative_eq!(z0, expected, max_relative = 1e-14);
        assert!((z0 - 71.11).abs() < 0.01);

        // weight collapse onto the fast pathway
        for t in [0.0, 0.5, 3.0, 20.0] {
            let dual =
                pk_dual_absorption(t, &REAL, 0.25, 1.0, 400.0, AbsorptionSign::Minus).unwrap();
            assert_relative_eq!(
                dual,
                pk_concentration(t, &REAL, 400.0).unwrap(),
                max_relative = 1e-14
            );
        }
        // rho = 1 makes both pathways identical
        for sign in [AbsorptionSign::Plus, AbsorptionSign::Minus] {
            let single = pk_dual_absorption(2.0, &REAL, 1.0, 1.0, 400.0, sign).unwrap();
            for f in [0.1, 0.6, 0.9] {
                let dual = pk_dual_absorption(2.0, &REAL, 1.0, f, 400.0, sign).unwrap();
                assert_relative_eq!(dual, single, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn concentration_non_negative_over_prior() {
        let cfg = PkConfig::default();
        let model = PkModel::new(cfg.clone(), PkVariant::Well);
        let mut rng = RngStream::new(4, 4);
        let mut thetas = vec![REAL.to_vec()];
        thetas.extend((0..100).map(|_| model.sample_prior(&mut rng)));
        for theta in thetas {
            for i in 0..=240 {
                let z = pk_concentration(i as f64 * 0.1, &as_theta(&theta), cfg.dose).unwrap();
                assert!(z >= 0.0, "negative concentration for {theta:?}");
            }
        }
    }

    #[test]
    fn observation_noise_constants() {
        let cfg = PkConfig::default();
        assert_eq!(
            PkModel::new(cfg.clone(), PkVariant::Well).noise_variance(0.0, &[0.0]),
            0.1
        );
        assert_eq!(
            PkModel::new(cfg, PkVariant::Mis).noise_variance(0.0, &[0.0]),
            0.2
        );
    }

    #[test]
    fn observation_moments() {
        let cfg = PkConfig::default();
        // rescale V so that z(1) = 10
        let z1 = pk_concentration(1.0, &REAL, cfg.dose).unwrap();
        let theta = [REAL[0], REAL[1], REAL[2] * z1 / 10.0];
        let z = pk_concentration(1.0, &theta, cfg.dose).unwrap();
        assert_relative_eq!(z, 10.0, max_relative = 1e-12);

        let mut rng = RngStream::new(9, 1);
        let n = 20_000;
        let ys: Vec<f64> = (0..n)
            .map(|_| pk_observe(1.0, &theta, PkVariant::Well, &cfg, &mut rng).unwrap())
            .collect();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (1.1f64 / n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se_mean);
        // sd of the sample variance of a normal: var * sqrt(2/(n-1))
        let se_var = 1.1 * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - 1.1).abs() < 3.0 * se_var, "var {var}");
    }
}
