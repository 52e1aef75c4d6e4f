//! Experiment orchestration: configuration, the design loop, metrics and
//! output files.

pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;
pub mod sweep;
pub mod validate;

pub use config::{parse_settings, read_settings, ExperimentConfig};
pub use metrics::{compute_mse, MetricsRow, MetricsWriter, RowDiagnostics, METRICS_HEADER};
pub use plot::{emit_plotdata, summarize, CurvePoint, Metric};
pub use run::{
    proxy_basis, run_experiment, run_in_memory, simulate, CellOutcome, CellStatus, RunManifest,
    RunResult,
};
pub use sweep::{sweep, sweep_in_memory, SweepParam, SweepPoint};
pub use validate::{
    bound_study, decomposition_study, region_study, run_validation, BoundStudy, BoundStudyConfig,
    Check, DecompositionStudy, RegionStudy, ValidationReport,
};
