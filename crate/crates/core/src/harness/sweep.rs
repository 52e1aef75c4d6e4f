use std::fmt;
use std::str::FromStr;

use super::config::ExperimentConfig;
use super::run::{run_experiment, run_in_memory, RunResult};
use crate::error::{BoedError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Lambda,
    Tau,
}

impl SweepParam {
    fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParam::Lambda => cfg.lambda = value,
            SweepParam::Tau => cfg.tau = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Tau => "tau",
        })
    }
}

impl FromStr for SweepParam {
    type Err = BoedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "tau" => Ok(SweepParam::Tau),
            other => Err(BoedError::Config(format!(
                "cannot sweep '{other}' (lambda|tau)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub result: RunResult,
}

fn check(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(BoedError::Config("sweep needs at least one value".into()));
    }
    let applicable = cfg.methods.iter().any(|m| match param {
        SweepParam::Lambda => m.uses_lambda(),
        SweepParam::Tau => m.uses_tau(),
    });
    if !applicable {
        return Err(BoedError::Config(format!(
            "no selected method uses {param}"
        )));
    }
    Ok(())
}

fn each(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    mut run: impl FnMut(&ExperimentConfig) -> Result<RunResult>,
) -> Result<Vec<SweepPoint>> {
    check(cfg, param, values)?;
    values
        .iter()
        .map(|&value| {
            let mut c = cfg.clone();
            param.apply(&mut c, value);
            c.out_dir = cfg.out_dir.join(format!("{param}={value}"));
            Ok(SweepPoint {
                value,
                result: run(&c)?,
            })
        })
        .collect()
}

/// One run per value, each in `out_dir/<param>=<value>`, with the same seeds.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
    each(cfg, param, values, run_experiment)
}

pub fn sweep_in_memory(
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepPoint>> {
    each(cfg, param, values, run_in_memory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Method;
    use crate::eig::EigConfig;
    use crate::testbeds::{Specification, TestbedKind};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(TestbedKind::Poly, Specification::Mis);
        cfg.methods = vec![Method::Random, Method::Ri];
        cfg.seeds = vec![0, 1];
        cfg.steps = 2;
        cfg.grid_per_dim = 21;
        cfg.eig = EigConfig {
            outer: 40,
            inner: 40,
        };
        cfg.test_samples = 20;
        cfg.mse_reps = 2;
        cfg
    }

    #[test]
    fn random_rows_are_paired_across_values() {
        let pts = sweep_in_memory(&small(), SweepParam::Lambda, &[0.25, 1.0]).unwrap();
        let random = |i: usize| {
            pts[i]
                .result
                .rows
                .iter()
                .filter(|r| r.method == Method::Random)
                .cloned()
                .collect::<Vec<_>>()
        };
        assert_eq!(random(0), random(1));
    }

    #[test]
    fn single_value_matches_plain_run() {
        let mut cfg = small();
        cfg.methods = vec![Method::Ridea];
        cfg.tau = 0.3;
        let pts = sweep_in_memory(&cfg, SweepParam::Tau, &[0.3]).unwrap();
        assert_eq!(pts[0].result.rows, run_in_memory(&cfg).unwrap().rows);
    }

    #[test]
    fn inapplicable_parameter() {
        let mut cfg = small();
        cfg.methods = vec![Method::Bad];
        assert!(sweep_in_memory(&cfg, SweepParam::Tau, &[0.1]).is_err());
        assert!(sweep_in_memory(&small(), SweepParam::Lambda, &[]).is_err());
        assert!("kappa".parse::<SweepParam>().is_err());
    }
}
