//! Per-(method, step) mean and standard error over seeds.

use std::path::{Path, PathBuf};

use super::metrics::{write_csv, MetricsRow};
use crate::acquisition::Method;
use crate::error::{usage, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Mmd2,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Mse, Metric::Mmd2];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Mmd2 => "mmd2",
        }
    }

    pub fn of(self, row: &MetricsRow) -> f64 {
        match self {
            Metric::Mse => row.mse,
            Metric::Mmd2 => row.mmd2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub method: Method,
    pub step: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds divided by `sqrt(n)`; 0 for one seed.
    pub se: f64,
    pub n: usize,
}

/// Mean curves, methods in order of first appearance, steps ascending.
pub fn summarize(rows: &[MetricsRow], metric: Metric) -> Vec<CurvePoint> {
    let mut methods: Vec<Method> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let mut out = Vec::new();
    for m in methods {
        let mut steps: Vec<usize> = rows
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.step)
            .collect();
        steps.sort_unstable();
        steps.dedup();
        for step in steps {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == m && r.step == step)
                .map(|r| metric.of(r))
                .collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            out.push(CurvePoint {
                method: m,
                step,
                mean,
                se,
                n,
            });
        }
    }
    out
}

/// Write `plot_mse.csv` and `plot_mmd2.csv` into `dir`.
pub fn emit_plotdata(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return usage("no metrics rows to summarise");
    }
    let mut written = Vec::new();
    for metric in Metric::ALL {
        let path = dir.join(format!("plot_{}.csv", metric.name()));
        let records = summarize(rows, metric).into_iter().map(|p| {
            vec![
                p.method.to_string(),
                p.step.to_string(),
                p.mean.to_string(),
                p.se.to_string(),
                p.n.to_string(),
            ]
        });
        write_csv(&path, &["method", "step", "mean", "se", "n"], records)?;
        written.push(path);
    }
    Ok(written)
}
