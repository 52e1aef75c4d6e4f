//! Experiment configuration and its flat `key=value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! testbed.kind = poly
//! testbed.spec = mis
//! acquisition.methods = random,bad,ri,ridea
//! acquisition.lambda = 1.0
//! run.steps = 10
//! run.seeds = 20
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionSpec, Method, ProxyConfig};
use crate::eig::EigConfig;
use crate::error::{BoedError, Result};
use crate::testbeds::{AbsorptionSign, Specification, TestbedConfig, TestbedKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub testbed: TestbedConfig,
    pub methods: Vec<Method>,
    pub lambda: f64,
    pub tau: f64,
    pub kappa: f64,
    /// Horizon `T`.
    pub steps: usize,
    pub seeds: Vec<u64>,
    /// Candidate grid points per design dimension.
    pub grid_per_dim: usize,
    pub eig: EigConfig,
    pub test_samples: usize,
    /// Fresh observations per test design in the MSE.
    pub mse_reps: usize,
    pub particles: usize,
    pub proxy: ProxyConfig,
    pub oracle_diagnostics: bool,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(kind: TestbedKind, spec: Specification) -> Self {
        let (steps, grid) = match kind {
            TestbedKind::Source => (30, 41),
            _ => (10, 201),
        };
        Self {
            testbed: TestbedConfig::new(kind, spec),
            methods: vec![Method::Random, Method::Bad, Method::Ri, Method::Ridea],
            lambda: 1.0,
            tau: 0.5,
            kappa: 1.0,
            steps,
            seeds: (0..20).collect(),
            grid_per_dim: grid,
            eig: EigConfig::default(),
            test_samples: 200,
            mse_reps: 10,
            particles: 2000,
            proxy: ProxyConfig::default(),
            oracle_diagnostics: false,
            out_dir: PathBuf::from("out"),
        }
    }

    pub fn acquisition(&self, method: Method) -> Result<AcquisitionSpec> {
        AcquisitionSpec::new(method, self.lambda, self.tau, self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BoedError::Config(msg));
        if self.steps == 0 {
            return fail("run.steps must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if self.test_samples < 2 {
            return fail("metrics.test_samples must be >= 2".into());
        }
        if self.mse_reps == 0 {
            return fail("metrics.mse_reps must be >= 1".into());
        }
        if self.grid_per_dim < 2 {
            return fail("grid.per_dim must be >= 2".into());
        }
        if self.eig.outer == 0 || self.eig.inner == 0 {
            return fail("eig.outer and eig.inner must be >= 1".into());
        }
        if self.particles == 0 {
            return fail("inference.particles must be >= 1".into());
        }
        if !(self.proxy.learning_rate > 0.0) || self.proxy.steps == 0 {
            return fail("proxy.steps must be >= 1 and proxy.learning_rate > 0".into());
        }
        AcquisitionSpec {
            method: Method::Ri,
            lambda: self.lambda,
            tau: self.tau,
            kappa: self.kappa,
        }
        .validate()?;
        let mut seen = self.methods.clone();
        seen.sort_by_key(|m| m.stream_id());
        seen.dedup();
        if seen.len() != self.methods.len() {
            return fail("methods must not repeat".into());
        }
        Ok(())
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "testbed.kind" => {
                let kind: TestbedKind = v.parse()?;
                let spec = self.testbed.spec;
                let fresh = ExperimentConfig::new(kind, spec);
                self.testbed = fresh.testbed;
                self.steps = fresh.steps;
                self.grid_per_dim = fresh.grid_per_dim;
            }
            "testbed.spec" => self.testbed.spec = v.parse()?,
            "testbed.poly.noise_variance" => self.testbed.poly.noise_variance = num(key, v)?,
            "testbed.poly.prior_variance" => self.testbed.poly.prior_variance = num(key, v)?,
            "testbed.poly.cubic" => {
                self.testbed.poly.cubic = if v == "none" {
                    None
                } else {
                    Some(num(key, v)?)
                };
            }
            "testbed.poly.model_degree" => self.testbed.poly.model_degree = Some(int(key, v)?),
            "testbed.poly.coefficients" => {
                let c = list_f64(key, v)?;
                self.testbed.poly.coefficients = c
                    .try_into()
                    .map_err(|_| BoedError::Config(format!("{key} needs exactly 3 values")))?;
            }
            "testbed.source.sources" => self.testbed.source.sources = int(key, v)?,
            "testbed.source.dim" => {
                self.testbed.source.dim = int(key, v)?;
            }
            "testbed.pk.absorption_sign" => {
                self.testbed.pk.absorption_sign = match v {
                    "plus" | "+" => AbsorptionSign::Plus,
                    "minus" | "-" => AbsorptionSign::Minus,
                    other => {
                        return Err(BoedError::Config(format!(
                            "{key}: expected plus|minus, got '{other}'"
                        )))
                    }
                }
            }
            "testbed.pk.rho" => self.testbed.pk.rho = num(key, v)?,
            "testbed.pk.fast_fraction" => self.testbed.pk.fast_fraction = num(key, v)?,
            "testbed.pk.dose" => self.testbed.pk.dose = num(key, v)?,
            "acquisition.methods" => {
                self.methods = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "acquisition.lambda" => self.lambda = num(key, v)?,
            "acquisition.tau" => self.tau = num(key, v)?,
            "acquisition.kappa" => self.kappa = num(key, v)?,
            "run.steps" => self.steps = int(key, v)?,
            "run.seeds" => self.seeds = (0..int(key, v)? as u64).collect(),
            "run.seed_list" => {
                self.seeds = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<u64>()
                            .map_err(|_| BoedError::Config(format!("{key}: bad seed '{s}'")))
                    })
                    .collect::<Result<_>>()?;
            }
            "run.oracle_diagnostics" => self.oracle_diagnostics = boolean(key, v)?,
            "grid.per_dim" => self.grid_per_dim = int(key, v)?,
            "eig.outer" => self.eig.outer = int(key, v)?,
            "eig.inner" => self.eig.inner = int(key, v)?,
            "metrics.test_samples" => self.test_samples = int(key, v)?,
            "metrics.mse_reps" => self.mse_reps = int(key, v)?,
            "inference.particles" => self.particles = int(key, v)?,
            "proxy.steps" => self.proxy.steps = int(key, v)?,
            "proxy.learning_rate" => self.proxy.learning_rate = num(key, v)?,
            "proxy.enriched" => self.proxy.enriched = boolean(key, v)?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            other => return Err(BoedError::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Start from defaults for the testbed named in `settings` (poly/mis when
    /// absent), then apply every setting in order.
    pub fn from_settings(settings: &[(String, String)]) -> Result<Self> {
        let find = |k: &str| {
            settings
                .iter()
                .rev()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let kind = find("testbed.kind")
            .map(str::parse)
            .transpose()?
            .unwrap_or(TestbedKind::Poly);
        let spec = find("testbed.spec")
            .map(str::parse)
            .transpose()?
            .unwrap_or(Specification::Mis);
        let mut cfg = ExperimentConfig::new(kind, spec);
        for (k, v) in settings {
            if k == "testbed.kind" {
                continue;
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| BoedError::Config(format!("{key}: expected a number, got '{v}'")))
}

fn int(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| {
        BoedError::Config(format!("{key}: expected a non-negative integer, got '{v}'"))
    })
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(BoedError::Config(format!(
            "{key}: expected true|false, got '{v}'"
        ))),
    }
}

fn list_f64(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

/// Parse `key=value` lines; later keys override earlier ones.
pub fn parse_settings(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            BoedError::Config(format!(
                "line {}: expected key=value, got '{raw}'",
                lineno + 1
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(BoedError::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(k.to_string(), (lineno, v.trim().to_string()));
    }
    let mut ordered: Vec<(String, (usize, String))> = out.into_iter().collect();
    ordered.sort_by_key(|(_, (line, _))| *line);
    Ok(ordered.into_iter().map(|(k, (_, v))| (k, v)).collect())
}

pub fn read_settings(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BoedError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_settings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_applies() {
        let text = "# experiment\ntestbed.kind = poly\ntestbed.spec=well\nacquisition.lambda=0.5 # inline\nacquisition.methods=bad,ri\nrun.seeds=3\n";
        let cfg = ExperimentConfig::from_settings(&parse_settings(text).unwrap()).unwrap();
        assert_eq!(cfg.testbed.spec, Specification::Well);
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.methods, vec![Method::Bad, Method::Ri]);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
    }

    #[test]
    fn later_settings_win() {
        let mut settings = parse_settings("acquisition.tau=0.1\nacquisition.tau=0.2").unwrap();
        assert_eq!(
            settings,
            vec![("acquisition.tau".to_string(), "0.2".to_string())]
        );
        settings.push(("acquisition.tau".into(), "0.9".into()));
        assert_eq!(ExperimentConfig::from_settings(&settings).unwrap().tau, 0.9);
    }

    #[test]
    fn testbed_defaults_follow_kind() {
        let s = vec![("testbed.kind".to_string(), "source".to_string())];
        let cfg = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.steps, 30);
        assert_eq!(cfg.testbed.kind, TestbedKind::Source);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_settings("novalue").is_err());
        for (k, v) in [
            ("acquisition.kappa", "0"),
            ("acquisition.lambda", "abc"),
            ("run.steps", "0"),
            ("run.seeds", "0"),
            ("metrics.test_samples", "1"),
            ("acquisition.methods", "bad,bad"),
            ("acquisition.methods", "greedy"),
            ("no.such.key", "1"),
        ] {
            let r = ExperimentConfig::from_settings(&[(k.to_string(), v.to_string())]);
            assert!(matches!(r, Err(BoedError::Config(_))), "{k}={v} accepted");
        }
    }
}
