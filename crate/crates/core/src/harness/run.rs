//! The sequential design loop.
//!
//! Random streams are derived from the seed by purpose so that, for a given
//! seed, the test sample, the observation noise at step `t` and the noise in
//! the MSE at step `t` are the same for every method.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{compute_mse, MetricsRow, MetricsWriter, RowDiagnostics};
use super::plot::emit_plotdata;
use crate::acquisition::{
    select_design, train_proxy, DeaReference, Method, ProxyBasis, ProxyFunction, ScoringContext,
};
use crate::diagnostics::{amplification_term, best_in_class, decompose, BestInClass};
use crate::error::{BoedError, Result};
use crate::inference::{FeatureMap, Posterior};
use crate::numerics::{IncrementalMmd, RngStream, SampleSet, DEFAULT_BANDWIDTH};
use crate::testbeds::Testbed;

/// Purpose keys for stream derivation.
pub mod keys {
    pub const TRUTH: u64 = 1;
    pub const TEST_SAMPLE: u64 = 2;
    pub const PRIOR: u64 = 3;
    pub const OBS: u64 = 4;
    pub const MSE: u64 = 5;
    pub const ACQ: u64 = 6;
    pub const INFER: u64 = 7;
    pub const BEST_IN_CLASS: u64 = 8;
}

pub const TOOL_NAME: &str = "boed-lab";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellOutcome {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStatus {
    pub seed: u64,
    pub method: Method,
    pub outcome: CellOutcome,
    pub steps_completed: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRoot {
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub rng_roots: Vec<SeedRoot>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub status: String,
    pub cells: Vec<CellStatus>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            BoedError::Config(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| BoedError::Config(format!("invalid manifest {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub rows: Vec<MetricsRow>,
    pub cells: Vec<CellStatus>,
    pub manifest: Option<RunManifest>,
}

impl RunResult {
    pub fn failed_cells(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.outcome == CellOutcome::Failed)
            .count()
    }

    /// 0 when every cell completed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_cells() == 0 {
            0
        } else {
            2
        }
    }
}

fn seed_root(seed: u64) -> RngStream {
    RngStream::new(seed, 0)
}

/// Everything shared by the methods run under one seed.
struct SeedContext {
    testbed: Testbed,
    test: SampleSet,
    candidates: Vec<Vec<f64>>,
    best: Option<BestInClass>,
}

fn seed_context(cfg: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let root = seed_root(seed);
    let testbed = cfg.testbed.instantiate(&mut root.derive(keys::TRUTH))?;
    let test = testbed.test_sample(cfg.test_samples, &mut root.derive(keys::TEST_SAMPLE))?;
    let candidates = testbed.candidates(cfg.grid_per_dim)?;
    let needs_best = cfg.oracle_diagnostics || cfg.methods.contains(&Method::RideaOracle);
    let best = if needs_best {
        Some(best_in_class(
            &testbed,
            &candidates,
            &mut root.derive(keys::BEST_IN_CLASS),
        )?)
    } else {
        None
    };
    Ok(SeedContext {
        testbed,
        test,
        candidates,
        best,
    })
}

/// Basis for the proxy: the assumed model's polynomial degree when it has
/// one, cubic otherwise; one degree higher when enriched.
pub fn proxy_basis(testbed: &Testbed, enriched: bool) -> ProxyBasis {
    let degree = match testbed.conjugate_prior().map(|p| p.features()) {
        Some(FeatureMap::Polynomial { degree }) => *degree,
        None => 3,
    };
    ProxyBasis::new(testbed.domain(), degree + usize::from(enriched))
}

fn run_cell(
    cfg: &ExperimentConfig,
    ctx: &SeedContext,
    seed: u64,
    method: Method,
    steps_done: &mut usize,
    on_row: &mut dyn FnMut(&MetricsRow) -> Result<()>,
) -> Result<()> {
    let root = seed_root(seed);
    let spec = cfg.acquisition(method)?;
    let tb = &ctx.testbed;
    let model = tb.model();
    let mut posterior = Posterior::prior_for(tb, cfg.particles, &mut root.derive(keys::PRIOR))?;
    let mut tracker = IncrementalMmd::new(&ctx.test, DEFAULT_BANDWIDTH)?;
    let basis = proxy_basis(tb, cfg.proxy.enriched);
    let mut proxy: Option<ProxyFunction> = None;
    let mut designs: Vec<Vec<f64>> = Vec::with_capacity(cfg.steps);
    let mut responses: Vec<f64> = Vec::with_capacity(cfg.steps);
    let oracle_fn = ctx.best.as_ref().map(|b| move |x: &[f64]| b.eval(model, x));

    for step in 1..=cfg.steps {
        let t = step as u64;
        let mut acq_rng = root.derive_path(&[keys::ACQ, method.stream_id(), t]);
        let proxy_fn = proxy.as_ref().map(|p| move |x: &[f64]| p.eval(x));
        let reference = match method {
            Method::Ridea => match &proxy_fn {
                Some(g) => DeaReference::Function(g),
                None => DeaReference::Unit,
            },
            Method::RideaOracle => match &oracle_fn {
                Some(f) => DeaReference::Function(f),
                None => {
                    return Err(BoedError::Usage(
                        "oracle variant needs the best-in-class predictor".into(),
                    ))
                }
            },
            _ => DeaReference::Unit,
        };
        let scoring = ScoringContext {
            posterior: &posterior,
            model,
            candidates: &ctx.candidates,
            eig: cfg.eig,
        };
        let selection = select_design(&spec, &scoring, &tracker, reference, &mut acq_rng)?;

        let y = tb.dgp_sample(&selection.design, &mut root.derive_path(&[keys::OBS, t]));
        posterior = posterior.update(
            model,
            &selection.design,
            y,
            &mut root.derive_path(&[keys::INFER, method.stream_id(), t]),
        )?;
        tracker.push(&selection.design)?;
        designs.push(selection.design.clone());
        responses.push(y);

        if method == Method::Ridea {
            let fhat: Vec<f64> = designs
                .iter()
                .map(|d| posterior.predictive_mean(model, d))
                .collect();
            proxy =
                Some(train_proxy(&basis, &designs, &responses, &fhat, spec.tau, &cfg.proxy)?.proxy);
        }

        let f_hat = |x: &[f64]| posterior.predictive_mean(model, x);
        let mse = compute_mse(
            f_hat,
            &ctx.test,
            |x, rng| tb.dgp_sample(x, rng),
            cfg.mse_reps,
            &mut root.derive_path(&[keys::MSE, t]),
        )?;
        let mmd2 = tracker.current().unwrap_or(f64::NAN);
        let diagnostics = match (&ctx.best, cfg.oracle_diagnostics) {
            (Some(best), true) => {
                let f_bar = |x: &[f64]| best.eval(model, x);
                let f_star = |x: &[f64]| tb.dgp_mean(x);
                let d = decompose(f_hat, f_bar, f_star, ctx.test.points())?;
                let a_hat = amplification_term(f_hat, f_bar, f_star, &designs)?;
                Some(RowDiagnostics {
                    b: d.b,
                    c: d.c,
                    a: d.a,
                    a_hat,
                })
            }
            _ => None,
        };
        if !mse.is_finite() {
            return Err(BoedError::Numerical(format!(
                "non-finite MSE at step {step}"
            )));
        }
        on_row(&MetricsRow {
            seed,
            step,
            method,
            mse,
            mmd2,
            design: selection.design,
            score: selection.score,
            diagnostics,
        })?;
        *steps_done = step;
    }
    Ok(())
}

/// Run every (seed, method) cell, handing rows to `on_row` as they are
/// produced. Failed cells are recorded and the run continues; errors from
/// `on_row` abort the run.
pub fn simulate(
    cfg: &ExperimentConfig,
    on_row: &mut dyn FnMut(&MetricsRow) -> Result<()>,
) -> Result<Vec<CellStatus>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        let ctx = seed_context(cfg, seed);
        for &method in &cfg.methods {
            let mut steps_done = 0;
            let mut sink_error = None;
            let outcome = match &ctx {
                Ok(ctx) => {
                    let mut guarded = |row: &MetricsRow| {
                        on_row(row).map_err(|e| {
                            let msg = e.to_string();
                            sink_error = Some(e);
                            BoedError::Io(std::io::Error::other(msg))
                        })
                    };
                    run_cell(cfg, ctx, seed, method, &mut steps_done, &mut guarded)
                }
                Err(e) => Err(BoedError::Usage(format!("seed setup failed: {e}"))),
            };
            if let Some(e) = sink_error {
                return Err(e);
            }
            cells.push(match outcome {
                Ok(()) => CellStatus {
                    seed,
                    method,
                    outcome: CellOutcome::Completed,
                    steps_completed: steps_done,
                    error: None,
                },
                Err(e) => CellStatus {
                    seed,
                    method,
                    outcome: CellOutcome::Failed,
                    steps_completed: steps_done,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(cells)
}

/// Run in memory without touching the filesystem.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<RunResult> {
    let mut rows = Vec::new();
    let cells = simulate(cfg, &mut |r| {
        rows.push(r.clone());
        Ok(())
    })?;
    Ok(RunResult {
        rows,
        cells,
        manifest: None,
    })
}

/// Run and write `metrics.csv`, `manifest.json` and plot summaries to
/// `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut writer = MetricsWriter::create(&cfg.out_dir.join("metrics.csv"))?;
    let mut rows = Vec::new();
    let cells = simulate(cfg, &mut |r| {
        writer.write(r)?;
        rows.push(r.clone());
        Ok(())
    })?;
    writer.finish()?;
    if !rows.is_empty() {
        emit_plotdata(&rows, &cfg.out_dir)?;
    }
    let failed = cells.iter().any(|c| c.outcome == CellOutcome::Failed);
    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        rng_roots: cfg
            .seeds
            .iter()
            .map(|&seed| SeedRoot { seed, stream: 0 })
            .collect(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status: if failed {
            "partial".into()
        } else {
            "complete".into()
        },
        cells: cells.clone(),
    };
    manifest.write(&cfg.out_dir.join("manifest.json"))?;
    Ok(RunResult {
        rows,
        cells,
        manifest: Some(manifest),
    })
}
