//! `boed-lab`: run, sweep and validate sequential design experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use boed_core::harness::{
    read_settings, run_experiment, run_validation, summarize, sweep, ExperimentConfig, Metric,
    RunManifest, RunResult, SweepParam,
};
use boed_core::BoedError;
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "boed-lab",
    version,
    about = "Sequential Bayesian experimental design under model misspecification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (seed, method) cell and write metrics.csv, manifest.json and plot summaries.
    Run(RunArgs),
    /// Repeat a run for several values of lambda or tau, with paired seeds.
    Sweep {
        /// Parameter to vary: lambda or tau.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the diagnostics property suites.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run the configuration stored in a previous run's manifest.json.
    #[arg(long, conflicts_with = "config")]
    manifest: Option<PathBuf>,
    /// poly, source or pk.
    #[arg(long)]
    testbed: Option<String>,
    /// well or mis.
    #[arg(long)]
    spec: Option<String>,
    /// Comma-separated: random,bad,ri,ridea,ridea-oracle.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Horizon T.
    #[arg(long)]
    steps: Option<usize>,
    /// Number of seeds, 0..N.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record B, C, A and A_hat per step (needs the true mean function).
    #[arg(long)]
    oracle_diagnostics: bool,
    /// Extra key=value settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig, BoedError> {
        if let Some(path) = &self.manifest {
            let mut cfg = RunManifest::load(path)?.config;
            if let Some(out) = &self.out {
                cfg.out_dir = out.clone();
            }
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut settings = match &self.config {
            Some(path) => read_settings(path)?,
            None => Vec::new(),
        };
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                settings.push((k.to_string(), v));
            }
        };
        flag("testbed.kind", self.testbed.clone());
        flag("testbed.spec", self.spec.clone());
        flag("acquisition.methods", self.methods.clone());
        flag("acquisition.lambda", self.lambda.map(|v| v.to_string()));
        flag("acquisition.tau", self.tau.map(|v| v.to_string()));
        flag("acquisition.kappa", self.kappa.map(|v| v.to_string()));
        flag("run.steps", self.steps.map(|v| v.to_string()));
        flag("run.seeds", self.seeds.map(|v| v.to_string()));
        flag(
            "output.dir",
            self.out.as_ref().map(|p| p.display().to_string()),
        );
        if self.oracle_diagnostics {
            flag("run.oracle_diagnostics", Some("true".into()));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| BoedError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            settings.push((k.trim().to_string(), v.trim().to_string()));
        }
        ExperimentConfig::from_settings(&settings)
    }
}

fn print_summary(label: &str, result: &RunResult) {
    let final_step = result.rows.iter().map(|r| r.step).max().unwrap_or(0);
    println!(
        "{label}: {} rows, {} failed cells",
        result.rows.len(),
        result.failed_cells()
    );
    let mse = summarize(&result.rows, Metric::Mse);
    let mmd = summarize(&result.rows, Metric::Mmd2);
    println!(
        "  {:<14} {:>12} {:>10} {:>12} {:>10}",
        "method", "final mse", "se", "final mmd2", "se"
    );
    for (m, d) in mse.iter().zip(&mmd).filter(|(p, _)| p.step == final_step) {
        println!(
            "  {:<14} {:>12.5} {:>10.5} {:>12.5} {:>10.5}",
            m.method.to_string(),
            m.mean,
            m.se,
            d.mean,
            d.se
        );
    }
    for cell in result.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "  failed: seed {} method {} after {} steps: {}",
            cell.seed,
            cell.method,
            cell.steps_completed,
            cell.error.as_deref().unwrap_or("")
        );
    }
}

fn fail(err: BoedError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match run_experiment(&cfg) {
                Ok(res) => {
                    print_summary(&cfg.out_dir.display().to_string(), &res);
                    ExitCode::from(res.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { param, values, run } => {
            let param: SweepParam = match param.parse() {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let cfg = match run.resolve() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match sweep(&cfg, param, &values) {
                Ok(points) => {
                    let mut partial = false;
                    for p in &points {
                        print_summary(&format!("{param}={}", p.value), &p.result);
                        partial |= p.result.failed_cells() > 0;
                    }
                    ExitCode::from(if partial { EXIT_PARTIAL } else { 0 })
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { seed, json } => match run_validation(seed) {
            Ok(report) => {
                if json {
                    match serde_json::to_string_pretty(&report) {
                        Ok(s) => println!("{s}"),
                        Err(e) => return fail(e.into()),
                    }
                } else {
                    for c in &report.checks {
                        println!(
                            "[{}] {}: {}",
                            if c.passed { "PASS" } else { "FAIL" },
                            c.name,
                            c.detail
                        );
                    }
                }
                ExitCode::from(if report.all_passed() { 0 } else { EXIT_PARTIAL })
            }
            Err(e) => fail(e),
        },
    }
}
